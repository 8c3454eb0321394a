"""Experiment protocols: Monte Carlo repeats, nested K-fold, grid search,
dataset-size sensitivity, and the mega test.

Every run derives its seed from (spec seed, protocol id, run index), keeps a
row-id audit (test rows never touch fitting, resampling, or encoding-map
fitting, except under the explicitly flagged balance_upfront mode), and
records wall-clock time. Reports serialize to JSON documents plus a flat
CSV leaderboard row.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import sampling, trees
from .encode import EncodingMode, encode_design, fit_design_maps
from .errors import ParameterError
from .metrics import (
    RunSummary,
    TTestResult,
    classification_report,
    summarize_runs,
    t_test,
)
from .store import Design, FeatureVersion, v3

IMBALANCE_STRATEGIES = ("none", "undersample_dev", "oversample_dev",
                        "smote_dev", "class_weight", "balance_upfront")

_PARAM_TYPES = {"dt": trees.DtParams, "rf": trees.RfParams, "gbdt": trees.GbdtParams}


def derive_seed(base_seed: int, protocol_id: str, index: int) -> int:
    """Stable per-run seed from the spec seed, protocol id, and run index."""
    digest = hashlib.sha256(f"{base_seed}|{protocol_id}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63 - 1)


@dataclass(frozen=True)
class GridSpec:
    space: dict

    def __post_init__(self):
        if not self.space or any(len(v) == 0 for v in self.space.values()):
            raise ParameterError("grid space must be non-empty")

    def candidates(self) -> list[dict]:
        keys = list(self.space.keys())
        return [dict(zip(keys, combo))
                for combo in itertools.product(*(self.space[k] for k in keys))]

    def __len__(self) -> int:
        n = 1
        for v in self.space.values():
            n *= len(v)
        return n


@dataclass(frozen=True)
class InnerProtocol:
    """How grid candidates are validated inside a development set."""
    kind: str = "kfold"  # kfold | monte_carlo
    k: int = 10
    repeats: int = 30
    test_fraction: float = 0.25

    def __post_init__(self):
        if self.kind not in ("kfold", "monte_carlo"):
            raise ParameterError(f"unknown inner protocol '{self.kind}'")


@dataclass(frozen=True)
class PipelineSpec:
    learner: str = "gbdt"
    params: dict = field(default_factory=dict)
    grid: GridSpec | None = None
    feature_version: FeatureVersion | None = None
    encoding: EncodingMode = EncodingMode.LABEL
    imbalance: str = "none"
    seed: int = 0
    smote_k: int = 5

    def __post_init__(self):
        if self.learner not in _PARAM_TYPES:
            raise ParameterError(f"unknown learner '{self.learner}'")
        if self.imbalance not in IMBALANCE_STRATEGIES:
            raise ParameterError(f"unknown imbalance strategy '{self.imbalance}'")
        self.make_params(self.params, 0)  # validate eagerly

    def make_params(self, overrides: dict, seed: int):
        base = dict(self.params)
        base.update(overrides)
        if self.imbalance == "class_weight":
            if self.learner != "gbdt":
                raise ParameterError(
                    "class_weight strategy requires the gbdt learner")
            base["is_unbalance"] = True
        base["seed"] = seed
        return _PARAM_TYPES[self.learner](**base)

    def fingerprint(self) -> str:
        payload = {
            "learner": self.learner,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "grid": ({k: list(v) for k, v in sorted(self.grid.space.items())}
                     if self.grid else None),
            "feature_version": (
                None if self.feature_version is None else
                {"kind": self.feature_version.kind,
                 "countries": list(self.feature_version.country_list or ())}),
            "encoding": self.encoding.value,
            "imbalance": self.imbalance,
            "seed": self.seed,
            "smote_k": self.smote_k,
        }
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "learner": self.learner,
            "params": dict(self.params),
            "grid": dict(self.grid.space) if self.grid else None,
            "feature_version": (
                None if self.feature_version is None else
                {"kind": self.feature_version.kind,
                 "countries": (list(self.feature_version.country_list)
                               if self.feature_version.country_list else None)}),
            "encoding": self.encoding.value,
            "imbalance": self.imbalance,
            "seed": self.seed,
            "smote_k": self.smote_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineSpec":
        version = None
        fv = d.get("feature_version")
        if fv:
            if fv["kind"] == "v3":
                version = v3(fv.get("countries"))
            else:
                version = FeatureVersion(fv["kind"])
        grid = GridSpec(d["grid"]) if d.get("grid") else None
        return cls(
            learner=d.get("learner", "gbdt"),
            params=dict(d.get("params", {})),
            grid=grid,
            feature_version=version,
            encoding=EncodingMode.parse(d.get("encoding", "label")),
            imbalance=d.get("imbalance", "none"),
            seed=int(d.get("seed", 0)),
            smote_k=int(d.get("smote_k", 5)))


@dataclass(frozen=True)
class RunRecord:
    index: int
    seed: int
    auroc: float
    accuracy: float
    seconds: float
    params: dict
    n_train: int
    n_test: int
    train_test_overlap: int
    resample_within_train: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ExperimentReport:
    protocol: str
    spec_fingerprint: str
    spec: dict
    aurocs: tuple[float, ...]
    accuracies: tuple[float, ...]
    summary: RunSummary
    runs: tuple[RunRecord, ...]
    seed_lineage: dict
    leakage_flag: bool = False
    grid_fit_count: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "spec_fingerprint": self.spec_fingerprint,
            "spec": self.spec,
            "aurocs": list(self.aurocs),
            "accuracies": list(self.accuracies),
            "summary": self.summary.to_dict(),
            "runs": [r.to_dict() for r in self.runs],
            "seed_lineage": self.seed_lineage,
            "leakage_flag": self.leakage_flag,
            "grid_fit_count": self.grid_fit_count,
            "extras": self.extras,
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        d = json.loads(Path(path).read_text())
        return cls(
            protocol=d["protocol"],
            spec_fingerprint=d["spec_fingerprint"],
            spec=d["spec"],
            aurocs=tuple(d["aurocs"]),
            accuracies=tuple(d["accuracies"]),
            summary=summarize_runs(
                d["aurocs"], [r["seconds"] for r in d["runs"]]),
            runs=tuple(RunRecord(**r) for r in d["runs"]),
            seed_lineage=d["seed_lineage"],
            leakage_flag=d["leakage_flag"],
            grid_fit_count=d["grid_fit_count"],
            extras=d.get("extras", {}))

    def csv_row(self) -> dict:
        return {
            "protocol": self.protocol,
            "fingerprint": self.spec_fingerprint,
            "learner": self.spec.get("learner", ""),
            "features": (self.spec.get("feature_version") or {}).get("kind", "none")
            if isinstance(self.spec.get("feature_version"), dict) else "none",
            "imbalance": self.spec.get("imbalance", ""),
            "n_runs": self.summary.n_runs,
            "mean_auroc": round(self.summary.mean, 6),
            "sd_auroc": round(self.summary.sd, 6),
            "total_seconds": round(self.summary.total_seconds, 4),
            "mean_seconds": round(self.summary.mean_seconds, 4),
            "leakage_flag": self.leakage_flag,
        }


LEADERBOARD_COLUMNS = ["protocol", "fingerprint", "learner", "features",
                       "imbalance", "n_runs", "mean_auroc", "sd_auroc",
                       "total_seconds", "mean_seconds", "leakage_flag"]


def append_leaderboard(report: ExperimentReport, path) -> Path:
    path = Path(path)
    exists = path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEADERBOARD_COLUMNS)
        if not exists:
            writer.writeheader()
        writer.writerow(report.csv_row())
    return path


@dataclass(frozen=True)
class ComparisonVerdict:
    mean_a: float
    mean_b: float
    ttest: TTestResult
    runtime_ratio: float

    @property
    def significant(self) -> bool:
        return self.ttest.significant

    def to_dict(self) -> dict:
        return {"mean_a": self.mean_a, "mean_b": self.mean_b,
                "ttest": self.ttest.to_dict(),
                "runtime_ratio": self.runtime_ratio,
                "significant": self.significant}


# ---------------------------------------------------------------------------
# single pipeline run
# ---------------------------------------------------------------------------

def _fit_learner(spec: PipelineSpec, overrides: dict, seed: int, X, y):
    params = spec.make_params(overrides, seed)
    if spec.learner == "dt":
        return trees.fit_decision_tree(X, y, params)
    if spec.learner == "rf":
        return trees.fit_random_forest(X, y, params)
    return trees.fit_gbdt(X, y, params)


def _resample(spec: PipelineSpec, X, y, seed: int):
    if spec.imbalance == "undersample_dev":
        return sampling.undersample(X, y, seed)
    if spec.imbalance == "oversample_dev":
        return sampling.oversample(X, y, seed)
    if spec.imbalance == "smote_dev":
        return sampling.smote(X, y, k_neighbors=spec.smote_k, seed=seed)
    return None


@dataclass
class RunOutput:
    record: RunRecord
    n_fits: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    discarded_majority: np.ndarray
    model: object
    test_scores: np.ndarray
    test_labels: np.ndarray


def run_pipeline_once(design: Design, spec: PipelineSpec, run_seed: int,
                      run_index: int = 0, test_fraction: float = 0.25,
                      split=None, overrides: dict | None = None) -> RunOutput:
    """One split -> encode -> resample -> fit -> score cycle with audit."""
    overrides = overrides or {}
    start = time.perf_counter()
    if split is None:
        split = sampling.stratified_split(design.labels, test_fraction, run_seed)
    train_idx, test_idx = split.train, split.test
    overlap = int(np.intersect1d(train_idx, test_idx).size)
    maps = fit_design_maps(design, rows=train_idx)
    X_train = encode_design(design, maps, spec.encoding, rows=train_idx).values
    X_test = encode_design(design, maps, spec.encoding, rows=test_idx).values
    y_train = design.labels[train_idx]
    y_test = design.labels[test_idx]
    resampled = _resample(spec, X_train, y_train, run_seed)
    discarded = np.empty(0, dtype=int)
    resample_ok = True
    if resampled is not None:
        real = resampled.indices[resampled.indices >= 0]
        resample_ok = bool(np.all(np.isin(real, np.arange(len(train_idx)))))
        if spec.imbalance == "undersample_dev":
            kept = set(resampled.indices.tolist())
            local_discarded = np.array(
                [i for i in range(len(train_idx)) if i not in kept], dtype=int)
            discarded = train_idx[local_discarded]
        X_fit, y_fit = resampled.features, resampled.labels
    else:
        X_fit, y_fit = X_train, y_train
    model = _fit_learner(spec, overrides, run_seed, X_fit, y_fit)
    scores = trees.predict_proba(model, X_test)
    report = classification_report(scores, y_test)
    seconds = time.perf_counter() - start
    record = RunRecord(
        index=run_index, seed=run_seed, auroc=report.auroc,
        accuracy=report.accuracy, seconds=seconds,
        params={**spec.params, **overrides},
        n_train=len(train_idx), n_test=len(test_idx),
        train_test_overlap=overlap, resample_within_train=resample_ok)
    return RunOutput(record=record, n_fits=1, train_idx=train_idx,
                     test_idx=test_idx, discarded_majority=discarded,
                     model=model, test_scores=scores, test_labels=y_test)


def _maybe_balance_upfront(design: Design, spec: PipelineSpec, seed: int):
    """The early-stage whole-dataset balancing mode; leaks test information."""
    if spec.imbalance != "balance_upfront":
        return design, spec, False
    warnings.warn("balance_upfront resamples before splitting and biases the "
                  "test set; reports carry a leakage flag", stacklevel=3)
    placeholder = np.zeros((design.n, 1))
    resampled = sampling.undersample(placeholder, design.labels, seed)
    balanced = design.subset(resampled.indices)
    return balanced, replace(spec, imbalance="none"), True


def _aggregate(protocol, spec, outputs, seed_lineage, leakage, grid_fits=0,
               extras=None) -> ExperimentReport:
    records = [o.record for o in outputs]
    aurocs = [r.auroc for r in records]
    timings = [r.seconds for r in records]
    return ExperimentReport(
        protocol=protocol,
        spec_fingerprint=spec.fingerprint(),
        spec=spec.to_dict(),
        aurocs=tuple(aurocs),
        accuracies=tuple(r.accuracy for r in records),
        summary=summarize_runs(aurocs, timings),
        runs=tuple(records),
        seed_lineage=seed_lineage,
        leakage_flag=leakage,
        grid_fit_count=grid_fits,
        extras=extras or {})


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------

def monte_carlo_eval(spec: PipelineSpec, design: Design, repeats: int = 30,
                     test_fraction: float = 0.25,
                     inner: InnerProtocol | None = None) -> ExperimentReport:
    """Independent stratified splits with fresh seeds per repeat.

    When the spec carries a grid, each repeat runs an inner grid search on
    its development portion (Monte Carlo inner protocol by default).
    """
    protocol = "monte_carlo"
    base_design = design
    outputs = []
    chosen = []
    grid_fits = 0
    for r in range(repeats):
        run_seed = derive_seed(spec.seed, protocol, r)
        run_design, run_spec, leak = _maybe_balance_upfront(base_design, spec, run_seed)
        overrides = {}
        if spec.grid is not None and len(spec.grid) > 1:
            split = sampling.stratified_split(
                run_design.labels, test_fraction, run_seed)
            dev = run_design.subset(split.train)
            result = grid_search(run_spec, dev,
                                 inner or InnerProtocol(kind="monte_carlo"),
                                 outer_index=r)
            overrides = result.best_params
            grid_fits += result.n_fits
            out = run_pipeline_once(run_design, run_spec, run_seed, r,
                                    test_fraction, split=split,
                                    overrides=overrides)
        else:
            if spec.grid is not None:
                overrides = spec.grid.candidates()[0]
            out = run_pipeline_once(run_design, run_spec, run_seed, r,
                                    test_fraction, overrides=overrides)
        chosen.append(overrides)
        outputs.append(out)
    leakage = spec.imbalance == "balance_upfront"
    lineage = {"base_seed": spec.seed, "protocol": protocol,
               "run_seeds": [o.record.seed for o in outputs]}
    return _aggregate(protocol, spec, outputs, lineage, leakage, grid_fits,
                      extras={"chosen_params": chosen,
                              "test_fraction": test_fraction})


def nested_kfold_eval(spec: PipelineSpec, design: Design, outer_k: int = 10,
                      inner_k: int = 10) -> ExperimentReport:
    """Outer stratified K-fold; per fold, inner-K grid search on the
    development portion, refit best, evaluate on the held-out fold."""
    protocol = "nested_kfold"
    base_seed = derive_seed(spec.seed, protocol, 0)
    run_design, run_spec, leakage = _maybe_balance_upfront(design, spec, base_seed)
    plan = sampling.kfold_plan(run_design.labels, outer_k, stratified=True,
                               seed=base_seed)
    outputs = []
    chosen = []
    grid_fits = 0
    for fold in range(outer_k):
        dev_idx, test_idx = plan.split(fold)
        overrides = {}
        if spec.grid is not None and len(spec.grid) > 1:
            dev = run_design.subset(dev_idx)
            result = grid_search(run_spec, dev,
                                 InnerProtocol(kind="kfold", k=inner_k),
                                 outer_index=fold)
            overrides = result.best_params
            grid_fits += result.n_fits
        elif spec.grid is not None:
            overrides = spec.grid.candidates()[0]
        run_seed = derive_seed(spec.seed, protocol, fold + 1)
        split = sampling.SplitIndices(train=dev_idx, test=test_idx, seed=run_seed)
        out = run_pipeline_once(run_design, run_spec, run_seed, fold,
                                split=split, overrides=overrides)
        outputs.append(out)
        chosen.append(overrides)
    lineage = {"base_seed": spec.seed, "protocol": protocol,
               "plan_seed": base_seed,
               "run_seeds": [o.record.seed for o in outputs]}
    return _aggregate(protocol, spec, outputs, lineage, leakage, grid_fits,
                      extras={"chosen_params": chosen,
                              "outer_k": outer_k, "inner_k": inner_k})


@dataclass(frozen=True)
class GridSearchResult:
    best_params: dict
    leaderboard: tuple
    n_fits: int

    def to_dict(self) -> dict:
        return {"best_params": self.best_params,
                "leaderboard": [
                    {"params": p, "mean_auroc": m, "sd": s}
                    for p, m, s in self.leaderboard],
                "n_fits": self.n_fits}


def grid_search(spec: PipelineSpec, dev: Design, inner: InnerProtocol,
                grid: GridSpec | None = None,
                outer_index: int = 0) -> GridSearchResult:
    """Evaluate every grid candidate with the inner protocol on the
    development set; ties break toward earlier enumeration order.

    Inner splits are shared across candidates (paired comparisons): the
    inner seeds depend only on the spec seed and the outer index.
    """
    grid = grid or spec.grid
    if grid is None:
        raise ParameterError("grid_search requires a grid")
    candidates = grid.candidates()
    if inner.kind == "kfold":
        plan_seed = derive_seed(spec.seed, f"inner_kfold[{outer_index}]", 0)
        plan = sampling.kfold_plan(dev.labels, inner.k, stratified=True,
                                   seed=plan_seed)
        splits = [plan.split(i) for i in range(inner.k)]
        run_seeds = [derive_seed(spec.seed, f"inner_kfold[{outer_index}]", i + 1)
                     for i in range(inner.k)]
    else:
        run_seeds = [derive_seed(spec.seed, f"inner_mc[{outer_index}]", i)
                     for i in range(inner.repeats)]
        splits = [None] * inner.repeats
    leaderboard = []
    n_fits = 0
    for cand in candidates:
        vals = []
        for i, (seed_i, preset) in enumerate(zip(run_seeds, splits)):
            split = None
            if preset is not None:
                split = sampling.SplitIndices(train=preset[0], test=preset[1],
                                              seed=seed_i)
            out = run_pipeline_once(dev, spec, seed_i, i,
                                    test_fraction=inner.test_fraction,
                                    split=split, overrides=cand)
            vals.append(out.record.auroc)
            n_fits += 1
        summary = summarize_runs(vals, [0.0] * len(vals))
        leaderboard.append((cand, summary.mean, summary.sd))
    best = max(range(len(candidates)), key=lambda i: leaderboard[i][1])
    # max() keeps the earliest index on ties
    return GridSearchResult(best_params=candidates[best],
                            leaderboard=tuple(leaderboard), n_fits=n_fits)


@dataclass(frozen=True)
class SensitivityReport:
    sizes: tuple[int, ...]
    summaries: dict
    spec_fingerprint: str

    def mean_at(self, size: int) -> float:
        return self.summaries[size].mean

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes),
                "summaries": {str(s): self.summaries[s].to_dict()
                              for s in self.sizes},
                "spec_fingerprint": self.spec_fingerprint}


def size_sensitivity(spec: PipelineSpec, design: Design, train_sizes,
                     repeats: int = 5,
                     test_fraction: float = 0.25) -> SensitivityReport:
    """AUROC against training-set size on a fixed held-out test set."""
    protocol = "size_sensitivity"
    holdout_seed = derive_seed(spec.seed, protocol, 0)
    split = sampling.stratified_split(design.labels, test_fraction, holdout_seed)
    pool_idx, test_idx = split.train, split.test
    sizes = sorted(int(s) for s in train_sizes)
    if sizes and sizes[-1] > len(pool_idx):
        raise ParameterError(
            f"train size {sizes[-1]} exceeds the pool of {len(pool_idx)} rows")
    summaries = {}
    for size in sizes:
        vals, times = [], []
        for r in range(repeats):
            seed_r = derive_seed(spec.seed, f"{protocol}[{size}]", r + 1)
            sub_local = sampling.stratified_subsample(
                design.labels[pool_idx], size, seed_r)
            train_idx = pool_idx[sub_local]
            run_split = sampling.SplitIndices(train=train_idx, test=test_idx,
                                              seed=seed_r)
            # absent rows are neither train nor test here: partial split
            out = run_pipeline_once(design, spec, seed_r, r, split=run_split)
            vals.append(out.record.auroc)
            times.append(out.record.seconds)
        summaries[size] = summarize_runs(vals, times)
    return SensitivityReport(sizes=tuple(sizes), summaries=summaries,
                             spec_fingerprint=spec.fingerprint())


@dataclass(frozen=True)
class MegaTestReport:
    standard_aurocs: tuple[float, ...]
    mega_aurocs: tuple[float, ...]
    standard_sizes: tuple[int, ...]
    mega_sizes: tuple[int, ...]
    ttest: TTestResult
    spec_fingerprint: str

    def to_dict(self) -> dict:
        return {"standard_aurocs": list(self.standard_aurocs),
                "mega_aurocs": list(self.mega_aurocs),
                "standard_sizes": list(self.standard_sizes),
                "mega_sizes": list(self.mega_sizes),
                "ttest": self.ttest.to_dict(),
                "spec_fingerprint": self.spec_fingerprint}


def mega_test(spec: PipelineSpec, design: Design, repeats: int = 10,
              test_fraction: float = 0.25) -> MegaTestReport:
    """Evaluate each run on the standard test fold and on the test fold plus
    the majority rows discarded by dev-set undersampling."""
    if spec.imbalance != "undersample_dev":
        raise ParameterError("mega_test requires the undersample_dev strategy")
    protocol = "mega_test"
    standard, mega, std_sizes, mega_sizes = [], [], [], []
    for r in range(repeats):
        run_seed = derive_seed(spec.seed, protocol, r)
        out = run_pipeline_once(design, spec, run_seed, r, test_fraction)
        standard.append(out.record.auroc)
        std_sizes.append(len(out.test_idx))
        maps = fit_design_maps(design, rows=out.train_idx)
        mega_idx = np.sort(np.concatenate([out.test_idx, out.discarded_majority]))
        X_mega = encode_design(design, maps, spec.encoding, rows=mega_idx).values
        from .metrics import auroc as _auroc
        mega.append(_auroc(trees.predict_proba(out.model, X_mega),
                           design.labels[mega_idx]))
        mega_sizes.append(len(mega_idx))
    return MegaTestReport(
        standard_aurocs=tuple(standard), mega_aurocs=tuple(mega),
        standard_sizes=tuple(std_sizes), mega_sizes=tuple(mega_sizes),
        ttest=t_test(standard, mega),
        spec_fingerprint=spec.fingerprint())


def compare(report_a: ExperimentReport, report_b: ExperimentReport) -> ComparisonVerdict:
    """t-test the AUROC series of two reports; records both means for tabulation."""
    result = t_test(report_a.aurocs, report_b.aurocs)
    tb = report_b.summary.total_seconds
    ratio = report_a.summary.total_seconds / tb if tb > 0 else float("inf")
    return ComparisonVerdict(
        mean_a=report_a.summary.mean, mean_b=report_b.summary.mean,
        ttest=result, runtime_ratio=ratio)
