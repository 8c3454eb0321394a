"""Final-model training, artifact persistence, scoring service, and CML.

The artifact is a field-tagged JSON document with a checksum, auditable and
lossless: loading it reproduces bit-identical predictions. The HTTP layer
serves scores and explanations from the active artifact; retrains swap the
artifact atomically so every response is produced by one coherent version.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import explain, sampling, trees
from .encode import (
    CategoryMap,
    EncodingMode,
    encode_customer_row,
    encode_design,
    fit_design_maps,
)
from .errors import (
    AmlRiskError,
    ConfigError,
    IntegrityError,
    NotFoundError,
    ParameterError,
)
from .harness import GridSearchResult, InnerProtocol, PipelineSpec, derive_seed
from .metrics import ClassificationReport, ConfusionMatrix, classification_report
from .store import V2, FeatureVersion, RelationalStore, v3

ARTIFACT_SCHEMA_VERSION = 1

FINAL_GBDT_PARAMS = {
    "n_estimators": 200, "learning_rate": 0.2, "num_leaves": 62,
    "max_depth": 5, "reg_lambda": 1.0, "max_bin": 510, "is_unbalance": True,
}


def default_final_spec(seed: int = 0) -> PipelineSpec:
    """The production configuration: GBDT final hyperparameters on V2
    features with one-hot encoding and dev-set undersampling."""
    return PipelineSpec(
        learner="gbdt", params=dict(FINAL_GBDT_PARAMS),
        feature_version=V2, encoding=EncodingMode.ONE_HOT,
        imbalance="undersample_dev", seed=seed)


@dataclass(frozen=True)
class ModelArtifact:
    ensemble: trees.TreeEnsemble
    feature_version: FeatureVersion | None
    encoding: EncodingMode
    maps: dict[str, CategoryMap]
    feature_names: tuple[str, ...]
    metrics: ClassificationReport
    hyperparams: dict
    created_ts: str
    version_id: int
    data_fingerprint: str
    event_watermark: int
    shap_space: str = "margin"

    def payload(self) -> dict:
        return {
            "schema_version": ARTIFACT_SCHEMA_VERSION,
            "ensemble": self.ensemble.to_dict(),
            "feature_version": (
                None if self.feature_version is None else
                {"kind": self.feature_version.kind,
                 "countries": (list(self.feature_version.country_list)
                               if self.feature_version.country_list else None)}),
            "encoding": self.encoding.value,
            "maps": {k: v.to_list() for k, v in self.maps.items()},
            "feature_names": list(self.feature_names),
            "metrics": self.metrics.to_dict(),
            "hyperparams": self.hyperparams,
            "created_ts": self.created_ts,
            "version_id": self.version_id,
            "data_fingerprint": self.data_fingerprint,
            "event_watermark": self.event_watermark,
            "shap_space": self.shap_space,
        }

    def to_json(self) -> str:
        payload = self.payload()
        body = json.dumps(payload, sort_keys=True)
        checksum = hashlib.sha256(body.encode()).hexdigest()
        return json.dumps({"checksum": checksum, "payload": payload},
                          sort_keys=True)

    @classmethod
    def from_payload(cls, payload: dict) -> "ModelArtifact":
        fv = payload.get("feature_version")
        version = None
        if fv:
            version = (v3(fv.get("countries")) if fv["kind"] == "v3"
                       else FeatureVersion(fv["kind"]))
        m = payload["metrics"]
        metrics = ClassificationReport(
            auroc=m["auroc"], accuracy=m["accuracy"], precision=m["precision"],
            recall=m["recall"], f1=m["f1"], threshold=m["threshold"],
            confusion=ConfusionMatrix(**m["confusion"]))
        return cls(
            ensemble=trees.TreeEnsemble.from_dict(payload["ensemble"]),
            feature_version=version,
            encoding=EncodingMode.parse(payload["encoding"]),
            maps={k: CategoryMap(tuple(v)) for k, v in payload["maps"].items()},
            feature_names=tuple(payload["feature_names"]),
            metrics=metrics,
            hyperparams=payload["hyperparams"],
            created_ts=payload["created_ts"],
            version_id=payload["version_id"],
            data_fingerprint=payload["data_fingerprint"],
            event_watermark=payload["event_watermark"],
            shap_space=payload.get("shap_space", "margin"))


def save_model(artifact: ModelArtifact, path) -> Path:
    path = Path(path)
    path.write_text(artifact.to_json())
    return path


def load_model(path) -> ModelArtifact:
    """Parse and verify an artifact file; corrupt input raises an
    IntegrityError carrying the byte offset."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IntegrityError(
            f"{path}: corrupt artifact JSON at offset {exc.pos}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict) or "payload" not in doc or "checksum" not in doc:
        raise IntegrityError(f"{path}: not an artifact document (offset 0)")
    body = json.dumps(doc["payload"], sort_keys=True)
    checksum = hashlib.sha256(body.encode()).hexdigest()
    if checksum != doc["checksum"]:
        offset = text.find(doc["checksum"])
        raise IntegrityError(
            f"{path}: checksum mismatch (stored checksum at offset {offset})")
    if doc["payload"].get("schema_version") != ARTIFACT_SCHEMA_VERSION:
        raise IntegrityError(
            f"{path}: unsupported artifact schema "
            f"{doc['payload'].get('schema_version')!r}")
    return ModelArtifact.from_payload(doc["payload"])


def train_final(store: RelationalStore,
                spec: PipelineSpec | None = None,
                test_fraction: float = 0.10,
                inner_k: int = 10) -> ModelArtifact:
    """Stratified holdout (10% test by default), optional 10-fold grid search
    on the development set, final fit on the full development set.

    The artifact stores the holdout classification report and registers
    itself in the store's model registry. Retraining on an unchanged store
    with the same seed reproduces identical ensemble bytes (only the version
    id and timestamp advance).
    """
    spec = spec or default_final_spec()
    design = store.load_design(spec.feature_version)
    holdout_seed = derive_seed(spec.seed, "train_final", 0)
    split = sampling.stratified_split(design.labels, test_fraction, holdout_seed)
    dev_idx, test_idx = split.train, split.test
    overrides: dict = {}
    if spec.grid is not None and len(spec.grid) > 1:
        from .harness import grid_search
        dev = design.subset(dev_idx)
        result: GridSearchResult = grid_search(
            spec, dev, InnerProtocol(kind="kfold", k=inner_k))
        overrides = result.best_params
    elif spec.grid is not None:
        overrides = spec.grid.candidates()[0]
    maps = fit_design_maps(design, rows=dev_idx)
    X_dev = encode_design(design, maps, spec.encoding, rows=dev_idx)
    X_test = encode_design(design, maps, spec.encoding, rows=test_idx)
    y_dev = design.labels[dev_idx]
    y_test = design.labels[test_idx]
    fit_seed = derive_seed(spec.seed, "train_final", 1)
    from .harness import _fit_learner, _resample
    resampled = _resample(spec, X_dev.values, y_dev, fit_seed)
    if resampled is not None:
        X_fit, y_fit = resampled.features, resampled.labels
    else:
        X_fit, y_fit = X_dev.values, y_dev
    model = _fit_learner(spec, overrides, fit_seed, X_fit, y_fit)
    model.feature_names = X_dev.names
    holdout = classification_report(
        trees.predict_proba(model, X_test.values), y_test)
    created = time.time()
    resolved_version = (store.resolve_version(spec.feature_version)
                        if spec.feature_version is not None else None)
    artifact = ModelArtifact(
        ensemble=model,
        feature_version=resolved_version,
        encoding=spec.encoding,
        maps=maps,
        feature_names=X_dev.names,
        metrics=holdout,
        hyperparams={**spec.params, **overrides, "learner": spec.learner,
                     "imbalance": spec.imbalance, "seed": spec.seed},
        created_ts=datetime.fromtimestamp(created, timezone.utc).isoformat(),
        version_id=0,
        data_fingerprint=store.data_fingerprint(),
        event_watermark=store.max_label_event_id(),
        shap_space="margin" if spec.learner == "gbdt" else "probability")
    version_id = store.register_model(
        artifact_json="", metrics_json=json.dumps(holdout.to_dict()),
        data_fingerprint=artifact.data_fingerprint,
        created_ts=created, event_watermark=artifact.event_watermark)
    artifact = replace(artifact, version_id=version_id)
    with store._lock, store._conn:
        store._conn.execute(
            "UPDATE model_registry SET artifact_json = ? WHERE version = ?",
            (artifact.to_json(), version_id))
    return artifact


def latest_artifact(store: RelationalStore) -> ModelArtifact | None:
    row = store.latest_model()
    if row is None or not row["artifact_json"]:
        return None
    return ModelArtifact.from_payload(
        json.loads(row["artifact_json"])["payload"])


@dataclass(frozen=True)
class ScoreResponse:
    cust_id: str
    score: float
    model_version: int
    top_features: list
    base_value: float
    shap_space: str

    def to_dict(self) -> dict:
        return {"cust_id": self.cust_id, "score": self.score,
                "model_version": self.model_version,
                "top_features": [{"name": n, "attribution": a}
                                 for n, a in self.top_features],
                "base_value": self.base_value,
                "shap_space": self.shap_space}


def customer_design_row(store: RelationalStore, artifact: ModelArtifact,
                        cust_id: str) -> np.ndarray:
    """Design row for one customer from current store state, using the
    artifact's feature version and encoding maps."""
    kyc_row = store.customer_kyc(cust_id)
    engineered = None
    if artifact.feature_version is not None:
        engineered = store.customer_feature_row(cust_id, artifact.feature_version)
    return encode_customer_row(kyc_row, engineered, artifact.maps,
                               artifact.encoding)


def score_customer(store: RelationalStore, artifact: ModelArtifact,
                   cust_id: str, top_k: int = 5) -> ScoreResponse:
    """Score plus top-k Shapley features, built on demand from the store."""
    row = customer_design_row(store, artifact, cust_id)
    score = float(trees.predict_proba(artifact.ensemble, row[None, :])[0])
    explanation = explain.tree_shap(artifact.ensemble, row)
    return ScoreResponse(
        cust_id=cust_id, score=score, model_version=artifact.version_id,
        top_features=explanation.top_features(top_k),
        base_value=explanation.base_value, shap_space=explanation.space)


def record_label(store: RelationalStore, cust_id: str, label: int,
                 source: str = "analyst") -> int:
    """Append-only analyst label override; feeds the CML change counter."""
    return store.append_label_event(cust_id, label, source)


@dataclass(frozen=True)
class CmlPolicy:
    max_age_seconds: float | None = 24 * 3600.0
    change_threshold: int | None = 100

    def __post_init__(self):
        if self.max_age_seconds is None and self.change_threshold is None:
            raise ConfigError("CmlPolicy needs at least one trigger")


@dataclass(frozen=True)
class CmlTickResult:
    retrained: bool
    artifact: ModelArtifact | None
    reason: str
    error: str | None = None


def cml_tick(store: RelationalStore, policy: CmlPolicy,
             spec: PipelineSpec | None = None,
             now: float | None = None) -> CmlTickResult:
    """Retrain when the active model is too old or too many label events
    accrued; training failures leave the previous artifact active."""
    now = time.time() if now is None else now
    latest = store.latest_model()
    reason = None
    if latest is None:
        reason = "no model trained yet"
    else:
        if policy.change_threshold is not None:
            changes = store.label_events_since(latest["event_watermark"])
            if changes > policy.change_threshold:
                reason = (f"{changes} label events since version "
                          f"{latest['version']} (threshold "
                          f"{policy.change_threshold})")
        if reason is None and policy.max_age_seconds is not None:
            age = now - latest["created_ts"]
            if age > policy.max_age_seconds:
                reason = (f"model age {age:.0f}s exceeds "
                          f"{policy.max_age_seconds:.0f}s")
    if reason is None:
        return CmlTickResult(retrained=False, artifact=None, reason="no trigger")
    try:
        artifact = train_final(store, spec)
    except AmlRiskError as exc:
        return CmlTickResult(retrained=False, artifact=None, reason=reason,
                             error=str(exc))
    return CmlTickResult(retrained=True, artifact=artifact, reason=reason)


class RetrainInProgress(AmlRiskError):
    """A retrain is already running."""


class RiskService:
    """Scoring service state: active artifact, batch-score cache, retrain lock.

    Concurrent readers share the active artifact by reference; retrain swaps
    it atomically, so each request is served end-to-end by one version.
    """

    def __init__(self, store: RelationalStore,
                 artifact: ModelArtifact | None = None,
                 spec: PipelineSpec | None = None,
                 reports_dir=None):
        self.store = store
        self.spec = spec
        self.reports_dir = Path(reports_dir) if reports_dir else None
        self._active = artifact if artifact is not None else latest_artifact(store)
        self._swap_lock = threading.Lock()
        self._retrain_lock = threading.Lock()
        self._cache_lock = threading.Lock()
        self._score_cache: tuple[int, dict[str, float]] | None = None

    @property
    def active(self) -> ModelArtifact:
        artifact = self._active
        if artifact is None:
            raise NotFoundError("no trained model is active")
        return artifact

    def activate(self, artifact: ModelArtifact) -> None:
        with self._swap_lock:
            self._active = artifact
        with self._cache_lock:
            self._score_cache = None

    def health(self) -> dict:
        version = self._active.version_id if self._active else None
        return {"status": "ok", "model_version": version}

    def model_info(self) -> dict:
        artifact = self.active
        return {
            "model_version": artifact.version_id,
            "created_ts": artifact.created_ts,
            "feature_version": (artifact.feature_version.kind
                                if artifact.feature_version else None),
            "encoding": artifact.encoding.value,
            "hyperparams": artifact.hyperparams,
            "metrics": artifact.metrics.to_dict(),
            "changes_since_train": self.store.label_events_since(
                artifact.event_watermark),
            "data_fingerprint": artifact.data_fingerprint,
        }

    def _batch_scores(self, artifact: ModelArtifact) -> dict[str, float]:
        with self._cache_lock:
            cached = self._score_cache
            if cached is not None and cached[0] == artifact.version_id:
                return cached[1]
        design = self.store.load_design(artifact.feature_version)
        matrix = encode_design(design, artifact.maps, artifact.encoding)
        scores = trees.predict_proba(artifact.ensemble, matrix.values)
        table = dict(zip(matrix.cust_ids, (float(s) for s in scores)))
        with self._cache_lock:
            self._score_cache = (artifact.version_id, table)
        return table

    def list_customers(self, sort: str = "risk", limit: int = 50,
                       offset: int = 0, min_score: float | None = None) -> dict:
        artifact = self.active
        if sort not in ("risk", "cust_id"):
            raise ParameterError(f"unknown sort key '{sort}'")
        if limit < 1 or offset < 0:
            raise ParameterError("limit must be >= 1 and offset >= 0")
        scores = self._batch_scores(artifact)
        design = self.store.load_design(None)
        effective = dict(zip(design.cust_ids, design.labels.tolist()))
        rows = []
        for i, cid in enumerate(design.cust_ids):
            s = scores[cid]
            if min_score is not None and s < min_score:
                continue
            rows.append({
                "cust_id": cid, "score": s,
                "age": int(design.age[i]), "tenur": int(design.tenur[i]),
                "occupation": str(design.occupation[i]),
                "effective_label": int(effective[cid]),
                "model_version": artifact.version_id,
            })
        if sort == "risk":
            rows.sort(key=lambda r: (-r["score"], r["cust_id"]))
        else:
            rows.sort(key=lambda r: r["cust_id"])
        page = rows[offset:offset + limit]
        return {"rows": page, "total": len(rows),
                "model_version": artifact.version_id}

    def score(self, cust_id: str, top_k: int = 5) -> ScoreResponse:
        return score_customer(self.store, self.active, cust_id, top_k)

    def submit_label(self, cust_id: str, label: int, source: str) -> dict:
        event_id = record_label(self.store, cust_id, label, source)
        artifact = self._active
        changes = (self.store.label_events_since(artifact.event_watermark)
                   if artifact else self.store.max_label_event_id())
        return {"event_id": event_id, "changes_since_train": changes}

    def label_history(self, cust_id: str) -> list[dict]:
        self.store.customer_kyc(cust_id)  # existence check
        return [
            {"event_id": e, "cust_id": c, "new_label": l, "source": s,
             "timestamp": t}
            for e, c, l, s, t in self.store.label_events() if c == cust_id]

    def retrain(self) -> ModelArtifact:
        """Train a fresh artifact and swap it in; 409-style error if running."""
        if not self._retrain_lock.acquire(blocking=False):
            raise RetrainInProgress("a retrain is already running")
        try:
            artifact = train_final(self.store, self.spec)
            self.activate(artifact)
            return artifact
        finally:
            self._retrain_lock.release()

    def reports(self) -> list[dict]:
        if self.reports_dir is None:
            return []
        leaderboard = self.reports_dir / "leaderboard.csv"
        if not leaderboard.exists():
            return []
        import csv as _csv
        with open(leaderboard, newline="") as fh:
            return list(_csv.DictReader(fh))


def build_app(svc: RiskService, token: str | None = None, ui_dir=None):
    """FastAPI application over a RiskService.

    Pass ui_dir to also serve a static console bundle under /ui.
    """
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse

    app = FastAPI(title="amlrisk scoring service")

    if token is not None:
        @app.middleware("http")
        async def _check_token(request, call_next):
            if request.method == "POST" and \
                    request.headers.get("x-auth-token") != token:
                return JSONResponse({"error": "invalid token"}, status_code=401)
            return await call_next(request)

    @app.exception_handler(NotFoundError)
    def _not_found(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=404)

    @app.exception_handler(ParameterError)
    def _bad_request(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.exception_handler(RetrainInProgress)
    def _busy(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=409)

    @app.exception_handler(AmlRiskError)
    def _internal(_, exc):
        return JSONResponse({"error": str(exc)}, status_code=500)

    @app.get("/health")
    def health():
        return svc.health()

    @app.get("/model")
    def model():
        return svc.model_info()

    @app.get("/customers")
    def customers(sort: str = "risk", limit: int = 50, offset: int = 0,
                  min_score: float | None = None):
        return svc.list_customers(sort=sort, limit=limit, offset=offset,
                                  min_score=min_score)

    @app.get("/customers/{cust_id}/score")
    def score(cust_id: str, top_k: int = 5):
        return svc.score(cust_id, top_k=top_k).to_dict()

    @app.get("/customers/{cust_id}/labels")
    def labels(cust_id: str):
        return {"events": svc.label_history(cust_id)}

    @app.post("/customers/{cust_id}/label")
    def submit_label(cust_id: str, body: dict):
        if "label" not in body or body["label"] not in (0, 1):
            raise ParameterError("body must carry a binary 'label'")
        return svc.submit_label(cust_id, int(body["label"]),
                                str(body.get("source", "analyst")))

    @app.post("/retrain")
    def retrain():
        artifact = svc.retrain()
        return {"retrained": True, "model_version": artifact.version_id}

    @app.get("/reports")
    def reports():
        return {"reports": svc.reports()}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app


def serve(store: RelationalStore, artifact: ModelArtifact | None = None,
          host: str = "127.0.0.1", port: int = 8080,
          spec: PipelineSpec | None = None, token: str | None = None,
          reports_dir=None, ui_dir=None) -> None:
    """Run the HTTP service (blocking)."""
    import uvicorn

    svc = RiskService(store, artifact=artifact, spec=spec,
                      reports_dir=reports_dir)
    app = build_app(svc, token=token, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
