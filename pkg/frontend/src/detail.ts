/**
 * Customer detail: score, SHAP bars, label history, confirm/override.
 *
 * Label submission is optimistic: the history gains a pending entry
 * immediately and reverts if the server rejects it. One-hot columns
 * (`occupation=...`) are aggregated into their source column for display,
 * mirroring how importance is split across encoded features.
 */
import { ApiClient, ApiError, LabelEvent, ScoreResponse } from "./api.js";
import { escapeHtml, formatScore } from "./format.js";

export interface ShapBar {
  name: string;
  attribution: number;
}

export function aggregateOneHot(
  features: ShapBar[],
  aggregate = true,
): ShapBar[] {
  if (!aggregate) return [...features];
  const merged = new Map<string, number>();
  for (const f of features) {
    const key = f.name.includes("=") ? f.name.split("=", 1)[0] : f.name;
    merged.set(key, (merged.get(key) ?? 0) + f.attribution);
  }
  return [...merged.entries()]
    .map(([name, attribution]) => ({ name, attribution }))
    .sort(
      (a, b) =>
        Math.abs(b.attribution) - Math.abs(a.attribution) ||
        a.name.localeCompare(b.name),
    );
}

export interface DetailState {
  custId: string | null;
  score: ScoreResponse | null;
  history: LabelEvent[];
  pendingEventId: number | null;
  submitting: boolean;
  error: string | null;
  changesSinceTrain: number | null;
}

export class DetailController {
  state: DetailState = {
    custId: null,
    score: null,
    history: [],
    pendingEventId: null,
    submitting: false,
    error: null,
    changesSinceTrain: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly aggregateOnehot = true,
  ) {}

  async open(custId: string): Promise<void> {
    this.state = { ...this.state, custId, error: null };
    try {
      const [score, labels] = await Promise.all([
        this.api.score(custId),
        this.api.labels(custId),
      ]);
      this.state.score = score;
      this.state.history = labels.events;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
  }

  async submitLabel(label: 0 | 1): Promise<void> {
    if (this.state.custId === null || this.state.submitting) return;
    this.state.submitting = true;
    this.state.error = null;
    // optimistic entry; replaced by the server's event id on success
    const optimistic: LabelEvent = {
      event_id: -1,
      cust_id: this.state.custId,
      new_label: label,
      source: "analyst",
      timestamp: Date.now() / 1000,
    };
    this.state.history = [...this.state.history, optimistic];
    try {
      const ack = await this.api.submitLabel(this.state.custId, label);
      optimistic.event_id = ack.event_id;
      this.state.changesSinceTrain = ack.changes_since_train;
    } catch (err) {
      // revert the optimistic entry
      this.state.history = this.state.history.filter(
        (e) => e !== optimistic,
      );
      this.state.error =
        err instanceof ApiError
          ? `label rejected (${err.status}): ${err.message}`
          : String(err);
    } finally {
      this.state.submitting = false;
    }
  }

  shapBars(): ShapBar[] {
    if (this.state.score === null) return [];
    return aggregateOneHot(this.state.score.top_features, this.aggregateOnehot);
  }

  render(): string {
    if (this.state.custId === null) {
      return '<p class="status">select a customer from the queue</p>';
    }
    if (this.state.error !== null && this.state.score === null) {
      return `<p class="status error">${escapeHtml(this.state.error)}</p>`;
    }
    if (this.state.score === null) {
      return '<p class="status">loading customer...</p>';
    }
    const s = this.state.score;
    const bars = this.shapBars();
    const maxAbs = Math.max(...bars.map((b) => Math.abs(b.attribution)), 1e-9);
    const barRows = bars
      .map((b) => {
        const width = Math.round((Math.abs(b.attribution) / maxAbs) * 100);
        const sign = b.attribution >= 0 ? "pos" : "neg";
        return `
        <div class="shap-row" data-feature="${escapeHtml(b.name)}">
          <span class="shap-name">${escapeHtml(b.name)}</span>
          <span class="shap-bar ${sign}" style="width:${width}%"></span>
          <span class="shap-value">${b.attribution.toFixed(3)}</span>
        </div>`;
      })
      .join("");
    const historyRows = this.state.history
      .map(
        (e) => `
      <li data-event-id="${e.event_id}">
        ${e.new_label === 1 ? "high risk" : "low risk"}
        by ${escapeHtml(e.source)}${e.event_id === -1 ? " (pending)" : ""}
      </li>`,
      )
      .join("");
    const inline =
      this.state.error !== null
        ? `<p class="status error inline">${escapeHtml(this.state.error)}</p>`
        : "";
    return `
    <h2>${escapeHtml(s.cust_id)}</h2>
    <p class="score-line">risk score <strong>${formatScore(s.score)}</strong>
      (model v${s.model_version}, base ${s.base_value.toFixed(3)} in
      ${escapeHtml(s.shap_space)} space)</p>
    <div class="shap-bars">${barRows}</div>
    <div class="label-actions">
      <button data-action="label-1" ${this.state.submitting ? "disabled" : ""}>
        confirm high risk</button>
      <button data-action="label-0" ${this.state.submitting ? "disabled" : ""}>
        mark low risk</button>
    </div>
    ${inline}
    <h3>label history (${this.state.history.length})</h3>
    <ul class="history">${historyRows}</ul>`;
  }
}
