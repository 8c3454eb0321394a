/**
 * Typed client for the amlrisk scoring service HTTP API.
 *
 * Every number the console displays comes from one of these response
 * payloads; the client never computes scores or features itself.
 */

export interface QueueRow {
  cust_id: string;
  score: number;
  age: number;
  tenur: number;
  occupation: string;
  effective_label: number;
  model_version: number;
}

export interface QueuePage {
  rows: QueueRow[];
  total: number;
  model_version: number;
}

export interface ShapFeature {
  name: string;
  attribution: number;
}

export interface ScoreResponse {
  cust_id: string;
  score: number;
  model_version: number;
  top_features: ShapFeature[];
  base_value: number;
  shap_space: string;
}

export interface LabelEvent {
  event_id: number;
  cust_id: string;
  new_label: number;
  source: string;
  timestamp: number;
}

export interface ModelMetrics {
  auroc: number;
  accuracy: number;
  precision: number;
  recall: number;
  f1: number;
}

export interface ModelInfo {
  model_version: number;
  created_ts: string;
  feature_version: string | null;
  encoding: string;
  hyperparams: Record<string, unknown>;
  metrics: ModelMetrics;
  changes_since_train: number;
}

export interface RetrainResponse {
  retrained: boolean;
  model_version: number;
}

export interface ReportRow {
  protocol: string;
  fingerprint: string;
  learner: string;
  features: string;
  imbalance: string;
  n_runs: string;
  mean_auroc: string;
  sd_auroc: string;
  total_seconds: string;
  mean_seconds: string;
  leakage_flag: string;
}

export interface QueueQuery {
  sort?: "risk" | "cust_id";
  limit?: number;
  offset?: number;
  min_score?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    private readonly token: string | null = null,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      ...(init?.headers as Record<string, string> | undefined),
    };
    if (init?.body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token !== null) {
      headers["X-Auth-Token"] = this.token;
    }
    const response = await this.fetchFn(this.baseUrl + path, {
      ...init,
      headers,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        detail = body.error ?? body.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; model_version: number | null }> {
    return this.request("/health");
  }

  model(): Promise<ModelInfo> {
    return this.request("/model");
  }

  customers(query: QueueQuery = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (query.sort) params.set("sort", query.sort);
    if (query.limit !== undefined) params.set("limit", String(query.limit));
    if (query.offset !== undefined) params.set("offset", String(query.offset));
    if (query.min_score !== undefined) {
      params.set("min_score", String(query.min_score));
    }
    const qs = params.toString();
    return this.request(`/customers${qs ? "?" + qs : ""}`);
  }

  score(custId: string, topK = 8): Promise<ScoreResponse> {
    return this.request(
      `/customers/${encodeURIComponent(custId)}/score?top_k=${topK}`,
    );
  }

  labels(custId: string): Promise<{ events: LabelEvent[] }> {
    return this.request(`/customers/${encodeURIComponent(custId)}/labels`);
  }

  submitLabel(
    custId: string,
    label: 0 | 1,
    source = "analyst",
  ): Promise<{ event_id: number; changes_since_train: number }> {
    return this.request(`/customers/${encodeURIComponent(custId)}/label`, {
      method: "POST",
      body: JSON.stringify({ label, source }),
    });
  }

  retrain(): Promise<RetrainResponse> {
    return this.request("/retrain", { method: "POST" });
  }

  reports(): Promise<{ reports: ReportRow[] }> {
    return this.request("/reports");
  }
}
