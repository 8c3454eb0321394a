/**
 * Retrain trigger + model panel: POST /retrain, poll GET /model until the
 * version increments, surface the new metrics. A 409 (retrain already
 * running) degrades to polling instead of failing.
 */
import { ApiClient, ApiError, ModelInfo } from "./api.js";
import { escapeHtml, formatMetric } from "./format.js";

export type RetrainPhase = "idle" | "running" | "done" | "failed";

export interface RetrainState {
  phase: RetrainPhase;
  model: ModelInfo | null;
  previousVersion: number | null;
  error: string | null;
}

export type SleepFn = (ms: number) => Promise<void>;

const defaultSleep: SleepFn = (ms) =>
  new Promise((resolve) => setTimeout(resolve, ms));

export class RetrainController {
  state: RetrainState = {
    phase: "idle",
    model: null,
    previousVersion: null,
    error: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly sleep: SleepFn = defaultSleep,
    private readonly pollIntervalMs = 500,
    private readonly maxPolls = 240,
  ) {}

  async refreshModel(): Promise<ModelInfo | null> {
    try {
      this.state.model = await this.api.model();
      return this.state.model;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
      return null;
    }
  }

  get busy(): boolean {
    return this.state.phase === "running";
  }

  async trigger(): Promise<void> {
    if (this.busy) return;
    const current = await this.refreshModel();
    this.state.previousVersion = current?.model_version ?? null;
    this.state.phase = "running";
    this.state.error = null;
    try {
      const ack = await this.api.retrain();
      // the service trains synchronously; poll anyway so a 202-style
      // implementation or a concurrent retrain behaves identically
      await this.pollUntilVersion(ack.model_version);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else is retraining; wait for their version bump
        const target =
          this.state.previousVersion === null
            ? 1
            : this.state.previousVersion + 1;
        await this.pollUntilVersion(target);
      } else {
        this.state.phase = "failed";
        this.state.error = err instanceof Error ? err.message : String(err);
      }
    }
  }

  private async pollUntilVersion(target: number): Promise<void> {
    for (let i = 0; i < this.maxPolls; i++) {
      const model = await this.refreshModel();
      if (model !== null && model.model_version >= target) {
        this.state.phase = "done";
        return;
      }
      await this.sleep(this.pollIntervalMs);
    }
    this.state.phase = "failed";
    this.state.error = `model version never reached v${target}`;
  }

  render(): string {
    const m = this.state.model;
    const panel =
      m === null
        ? '<p class="status">no model loaded</p>'
        : `
      <dl class="model-panel" data-model-version="${m.model_version}">
        <dt>version</dt><dd>v${m.model_version}</dd>
        <dt>trained</dt><dd>${escapeHtml(m.created_ts)}</dd>
        <dt>AUROC</dt><dd>${formatMetric(m.metrics.auroc)}</dd>
        <dt>accuracy</dt><dd>${formatMetric(m.metrics.accuracy)}</dd>
        <dt>precision</dt><dd>${formatMetric(m.metrics.precision)}</dd>
        <dt>recall</dt><dd>${formatMetric(m.metrics.recall)}</dd>
        <dt>F1</dt><dd>${formatMetric(m.metrics.f1)}</dd>
        <dt>label changes since train</dt><dd>${m.changes_since_train}</dd>
      </dl>`;
    const status =
      this.state.phase === "running"
        ? '<p class="status" data-retrain="running">retraining...</p>'
        : this.state.phase === "done" && m !== null
          ? `<p class="status" data-retrain="done">model updated to ` +
            `v${m.model_version}</p>`
          : this.state.phase === "failed"
            ? `<p class="status error" data-retrain="failed">` +
              `${escapeHtml(this.state.error ?? "retrain failed")}</p>`
            : "";
    return `
    ${panel}
    <button data-action="retrain" ${this.busy ? "disabled" : ""}>
      retrain now</button>
    ${status}`;
  }
}
