/** Experiment report browser over GET /reports (the flat leaderboard). */
import { ApiClient, ReportRow } from "./api.js";
import { escapeHtml } from "./format.js";

export class ReportsController {
  rows: ReportRow[] = [];
  error: string | null = null;

  constructor(private readonly api: ApiClient) {}

  async load(): Promise<void> {
    this.error = null;
    try {
      this.rows = (await this.api.reports()).reports;
    } catch (err) {
      this.error = err instanceof Error ? err.message : String(err);
    }
  }

  render(): string {
    if (this.error !== null) {
      return `<p class="status error">${escapeHtml(this.error)}</p>`;
    }
    if (this.rows.length === 0) {
      return '<p class="status">no experiment reports recorded</p>';
    }
    const body = this.rows
      .map(
        (r) => `
      <tr${r.leakage_flag === "True" ? ' class="leaky"' : ""}>
        <td>${escapeHtml(r.protocol)}</td>
        <td>${escapeHtml(r.learner)}</td>
        <td>${escapeHtml(r.features)}</td>
        <td>${escapeHtml(r.imbalance)}</td>
        <td>${escapeHtml(r.mean_auroc)} &plusmn; ${escapeHtml(r.sd_auroc)}</td>
        <td>${escapeHtml(r.n_runs)}</td>
        <td>${escapeHtml(r.total_seconds)}s</td>
      </tr>`,
      )
      .join("");
    return `
    <table class="reports">
      <thead><tr><th>protocol</th><th>learner</th><th>features</th>
      <th>imbalance</th><th>AUROC</th><th>runs</th><th>time</th></tr></thead>
      <tbody>${body}</tbody>
    </table>`;
  }
}
