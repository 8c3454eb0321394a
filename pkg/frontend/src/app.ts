/**
 * Browser entry point: wires the controllers into the page and keeps the
 * model version fresh via periodic polling.
 */
import { ApiClient } from "./api.js";
import { DetailController } from "./detail.js";
import { QueueController } from "./queue.js";
import { ReportsController } from "./reports.js";
import { RetrainController } from "./retrain.js";

const tokenField = document.querySelector<HTMLInputElement>("#token");
const api = new ApiClient(
  "",
  (url, init) => fetch(url, init),
  tokenField?.value || null,
);

const queue = new QueueController(api);
const detail = new DetailController(api);
const retrain = new RetrainController(api);
const reports = new ReportsController(api);

const queueEl = document.querySelector<HTMLElement>("#queue")!;
const detailEl = document.querySelector<HTMLElement>("#detail")!;
const modelEl = document.querySelector<HTMLElement>("#model")!;
const reportsEl = document.querySelector<HTMLElement>("#reports")!;

function paint(): void {
  queueEl.innerHTML = queue.render();
  detailEl.innerHTML = detail.render();
  modelEl.innerHTML = retrain.render();
  reportsEl.innerHTML = reports.render();
}

async function refreshQueue(): Promise<void> {
  const minScoreField =
    document.querySelector<HTMLInputElement>("#min-score");
  const minScore = minScoreField?.value ? Number(minScoreField.value) : undefined;
  await queue.load({ min_score: minScore, offset: 0 });
  paint();
}

document.addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  const action = target.dataset.action;
  const row = target.closest<HTMLElement>("tr[data-cust-id]");
  if (row?.dataset.custId) {
    await detail.open(row.dataset.custId);
    paint();
    return;
  }
  switch (action) {
    case "refresh-queue":
    case "retry-queue":
      await refreshQueue();
      break;
    case "label-1":
      await detail.submitLabel(1);
      await retrain.refreshModel();
      paint();
      break;
    case "label-0":
      await detail.submitLabel(0);
      await retrain.refreshModel();
      paint();
      break;
    case "retrain":
      paint();
      await retrain.trigger();
      if (retrain.state.model !== null) {
        queue.noteModelVersion(retrain.state.model.model_version);
      }
      paint();
      break;
    default:
      break;
  }
});

document
  .querySelector<HTMLElement>("#apply-filters")
  ?.addEventListener("click", () => void refreshQueue());

async function start(): Promise<void> {
  await Promise.all([queue.load(), retrain.refreshModel(), reports.load()]);
  paint();
  // keep the version stamp fresh so the stale banner can appear
  setInterval(async () => {
    const model = await retrain.refreshModel();
    if (model !== null) {
      queue.noteModelVersion(model.model_version);
      paint();
    }
  }, 10_000);
}

void start();
