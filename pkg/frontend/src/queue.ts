/**
 * Ranked high-risk queue: paged, filtered, sorted rows from GET /customers.
 *
 * Every row is stamped with the model version that scored it; when the
 * service reports a newer model than the loaded rows, a refresh banner
 * appears instead of silently mixing versions.
 */
import { ApiClient, QueueQuery, QueueRow } from "./api.js";
import { escapeHtml, formatScore, labelBadge } from "./format.js";

export interface QueueState {
  rows: QueueRow[];
  total: number;
  modelVersion: number | null;
  latestKnownVersion: number | null;
  filters: QueueQuery;
  loading: boolean;
  error: string | null;
}

export class QueueController {
  state: QueueState = {
    rows: [],
    total: 0,
    modelVersion: null,
    latestKnownVersion: null,
    filters: { sort: "risk", limit: 50, offset: 0 },
    loading: false,
    error: null,
  };

  constructor(private readonly api: ApiClient) {}

  async load(filters: Partial<QueueQuery> = {}): Promise<void> {
    this.state.filters = { ...this.state.filters, ...filters };
    this.state.loading = true;
    this.state.error = null;
    try {
      const page = await this.api.customers(this.state.filters);
      this.state.rows = page.rows;
      this.state.total = page.total;
      this.state.modelVersion = page.model_version;
      if (
        this.state.latestKnownVersion === null ||
        page.model_version > this.state.latestKnownVersion
      ) {
        this.state.latestKnownVersion = page.model_version;
      }
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.loading = false;
    }
  }

  async nextPage(): Promise<void> {
    const { offset = 0, limit = 50 } = this.state.filters;
    await this.load({ offset: offset + limit });
  }

  /** Called by the model poller; marks the view stale after a retrain. */
  noteModelVersion(version: number): void {
    if (
      this.state.latestKnownVersion === null ||
      version > this.state.latestKnownVersion
    ) {
      this.state.latestKnownVersion = version;
    }
  }

  get stale(): boolean {
    return (
      this.state.modelVersion !== null &&
      this.state.latestKnownVersion !== null &&
      this.state.latestKnownVersion > this.state.modelVersion
    );
  }

  render(): string {
    if (this.state.loading) {
      return '<p class="status">loading queue...</p>';
    }
    if (this.state.error !== null) {
      return (
        `<p class="status error">queue failed to load: ` +
        `${escapeHtml(this.state.error)}</p>` +
        '<button data-action="retry-queue">retry</button>'
      );
    }
    const banner = this.stale
      ? `<div class="banner" data-banner="stale">model updated to ` +
        `v${this.state.latestKnownVersion}; rows were scored by ` +
        `v${this.state.modelVersion} <button data-action="refresh-queue">` +
        `refresh</button></div>`
      : "";
    const rows = this.state.rows
      .map(
        (row) => `
      <tr data-cust-id="${escapeHtml(row.cust_id)}">
        <td>${escapeHtml(row.cust_id)}</td>
        <td class="score">${formatScore(row.score)}</td>
        <td>${row.age}</td>
        <td>${row.tenur}</td>
        <td>${escapeHtml(row.occupation)}</td>
        <td>${labelBadge(row.effective_label)}</td>
        <td class="version">v${row.model_version}</td>
      </tr>`,
      )
      .join("");
    return `${banner}
    <table class="queue">
      <thead>
        <tr><th>customer</th><th>risk score</th><th>age</th><th>tenur</th>
        <th>occupation</th><th>label</th><th>model</th></tr>
      </thead>
      <tbody>${rows}</tbody>
    </table>
    <p class="summary">${this.state.rows.length} of ${this.state.total} rows
    (sorted by ${this.state.filters.sort ?? "risk"}${
      this.state.filters.min_score !== undefined
        ? `, score >= ${this.state.filters.min_score}`
        : ""
    })</p>`;
  }
}
