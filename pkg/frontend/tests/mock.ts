/** Recording fetch stub: scripted responses keyed by `METHOD path`. */
import { FetchLike } from "../src/api.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export type Responder =
  | { status: number; body: unknown }
  | ((call: RecordedCall) => { status: number; body: unknown });

export class MockServer {
  calls: RecordedCall[] = [];
  private routes = new Map<string, Responder[]>();

  on(method: string, path: string, responder: Responder): this {
    const key = `${method} ${path}`;
    const queue = this.routes.get(key) ?? [];
    queue.push(responder);
    this.routes.set(key, queue);
    return this;
  }

  countCalls(method: string, pathPrefix: string): number {
    return this.calls.filter(
      (c) => c.method === method && c.url.startsWith(pathPrefix),
    ).length;
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.split("?")[0];
    const body =
      typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    const call: RecordedCall = { method, url, body };
    this.calls.push(call);
    const queue = this.routes.get(`${method} ${path}`);
    if (queue === undefined || queue.length === 0) {
      return jsonResponse(404, { error: `no route for ${method} ${path}` });
    }
    const responder = queue.length > 1 ? queue.shift()! : queue[0];
    const result =
      typeof responder === "function" ? responder(call) : responder;
    return jsonResponse(result.status, result.body);
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function modelInfo(version: number, changes = 0) {
  return {
    model_version: version,
    created_ts: "2024-05-01T10:00:00+00:00",
    feature_version: "v2",
    encoding: "one_hot",
    hyperparams: { learner: "gbdt", n_estimators: 200 },
    metrics: {
      auroc: 0.957,
      accuracy: 0.91,
      precision: 0.9,
      recall: 0.88,
      f1: 0.89,
      threshold: 0.5,
      confusion: { tp: 10, fp: 2, tn: 80, fn: 3 },
    },
    changes_since_train: changes,
    data_fingerprint: "abc123",
  };
}

export function queueRow(custId: string, score: number, version = 1) {
  return {
    cust_id: custId,
    score,
    age: 34,
    tenur: 3,
    occupation: "occ_007",
    effective_label: score > 0.5 ? 1 : 0,
    model_version: version,
  };
}
