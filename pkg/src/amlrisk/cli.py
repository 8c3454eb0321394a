"""Command-line front end for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 runtime error. All experiment
parameters can also come from a JSON config file (--config); explicit flags
override file values. Every subcommand is deterministic given --seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datagen, harness, service, store, trees
from .encode import EncodingMode
from .errors import AmlRiskError
from .harness import GridSpec, PipelineSpec
from .store import V1, V2, FeatureVersion, v3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_version(name: str | None, countries=None) -> FeatureVersion | None:
    if name is None or name == "none":
        return None
    name = name.lower()
    if name == "v1":
        return V1
    if name == "v2":
        return V2
    if name == "v3":
        return v3(countries)
    raise AmlRiskError(f"unknown feature version '{name}'")


def _parse_kv_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise AmlRiskError(f"--param expects key=value, got '{pair}'")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _spec_from_args(args, config: dict) -> PipelineSpec:
    merged = dict(config.get("spec", config))
    if getattr(args, "learner", None):
        merged["learner"] = args.learner
    if getattr(args, "features", None):
        merged["feature_version"] = {"kind": args.features.lower()} \
            if args.features != "none" else None
    if getattr(args, "encoding", None):
        merged["encoding"] = args.encoding
    if getattr(args, "imbalance", None):
        merged["imbalance"] = args.imbalance
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    params = dict(merged.get("params", {}))
    params.update(_parse_kv_params(getattr(args, "param", []) or []))
    merged["params"] = params
    if getattr(args, "grid", None):
        merged["grid"] = json.loads(args.grid)
    return PipelineSpec.from_dict(merged)


def _open_store(args) -> store.RelationalStore:
    db = Path(args.db)
    if not db.exists():
        raise AmlRiskError(f"database not found: {db}")
    return store.RelationalStore(db)


def build_parser() -> _Parser:
    parser = _Parser(prog="amlrisk",
                     description="Anti-money-laundering risk pipeline")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker-thread cap; never changes results")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate synthetic CSVs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--imbalance", type=float, default=0.972,
                   help="majority-class ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--occupations", type=int, default=250)
    p.add_argument("--signal", action="append", default=[],
                   help="motif=strength, repeatable")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest", help="load the four CSVs into a store")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--db", required=True)

    p = sub.add_parser("explore", help="profile the dataset")
    p.add_argument("--db", required=True)
    p.add_argument("--json", dest="json_out", help="write profile JSON here")

    p = sub.add_parser("features", help="materialize a feature table")
    p.add_argument("--db", required=True)
    p.add_argument("--version", default="v2", choices=["v1", "v2", "v3"])
    p.add_argument("--countries", nargs="*", default=None)

    def add_spec_flags(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--learner", choices=["dt", "rf", "gbdt"])
        p.add_argument("--features", choices=["none", "v1", "v2", "v3"])
        p.add_argument("--encoding", choices=["label", "one_hot"])
        p.add_argument("--imbalance", choices=list(harness.IMBALANCE_STRATEGIES))
        p.add_argument("--param", action="append", default=[],
                       help="learner hyperparameter key=value, repeatable")
        p.add_argument("--grid", help="JSON grid space")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train and persist the final model")
    p.add_argument("--db", required=True)
    p.add_argument("--out", help="artifact file (also registered in the store)")
    p.add_argument("--test-fraction", type=float, default=0.10)
    add_spec_flags(p)

    p = sub.add_parser("evaluate", help="run an experiment protocol")
    p.add_argument("--db", required=True)
    p.add_argument("--protocol", required=True,
                   choices=["monte-carlo", "nested-kfold"])
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--outer", type=int, default=10)
    p.add_argument("--inner", type=int, default=10)
    p.add_argument("--out", default="reports")
    add_spec_flags(p)

    p = sub.add_parser("compare", help="t-test two report files")
    p.add_argument("report_a")
    p.add_argument("report_b")

    p = sub.add_parser("sensitivity", help="dataset size sensitivity")
    p.add_argument("--db", required=True)
    p.add_argument("--sizes", required=True,
                   help="comma-separated training sizes")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default="reports")
    add_spec_flags(p)

    p = sub.add_parser("megatest", help="standard-vs-mega test comparison")
    p.add_argument("--db", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", default="reports")
    add_spec_flags(p)

    p = sub.add_parser("explain", help="SHAP explanation for a customer")
    p.add_argument("--db", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--cust-id")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--global", dest="global_rank", action="store_true",
                   help="global importance over a customer sample")
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--aggregate-onehot", action="store_true")

    p = sub.add_parser("serve", help="run the scoring service")
    p.add_argument("--db", required=True)
    p.add_argument("--artifact", help="artifact file; default: store registry")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--token", default=None)
    p.add_argument("--reports-dir", default=None)
    p.add_argument("--ui-dir", default=None,
                   help="serve a static console bundle under /ui")

    p = sub.add_parser("retrain", help="apply the continuous-learning policy")
    p.add_argument("--db", required=True)
    p.add_argument("--force", action="store_true",
                   help="retrain regardless of the policy")
    p.add_argument("--age-hours", type=float, default=24.0)
    p.add_argument("--changes", type=int, default=100)
    p.add_argument("--out", help="write the new artifact here")
    add_spec_flags(p)
    return parser


def _cmd_generate(args) -> int:
    signals = {}
    for pair in args.signal:
        motif, _, raw = pair.partition("=")
        signals[motif] = float(raw)
    cfg_kwargs = dict(n_customers=args.n, majority_ratio=args.imbalance,
                      seed=args.seed, n_occupations=args.occupations)
    if signals:
        cfg_kwargs["signal_strengths"] = signals
    cfg = datagen.GenConfig(**cfg_kwargs)
    ds = datagen.generate_dataset(cfg)
    paths = datagen.write_csv(ds, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_ingest(args) -> int:
    db = Path(args.db)
    db.parent.mkdir(parents=True, exist_ok=True)
    with store.ingest_dataset_dir(args.data_dir, db) as s:
        print(f"kyc rows: {s.row_count('kyc')}")
        print(f"cash rows: {s.row_count('cash_trxns')}")
        print(f"emt rows: {s.row_count('emt_trxns')}")
        print(f"wire rows: {s.row_count('wire_trxns')}")
    return 0


def _cmd_explore(args) -> int:
    with _open_store(args) as s:
        profile = s.profile_dataset()
    doc = json.dumps(profile.to_dict(), indent=2)
    if args.json_out:
        Path(args.json_out).write_text(doc)
        print(f"profile written to {args.json_out}")
    else:
        print(doc)
    return 0


def _cmd_features(args) -> int:
    version = _parse_version(args.version, args.countries)
    with _open_store(args) as s:
        table = s.build_features(version)
    print(f"{table.version.table}: {len(table.cust_ids)} rows x "
          f"{len(table.names)} features")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_args(args, config) if (
        config or args.learner or args.param or args.grid or args.features
        or args.encoding or args.imbalance or args.seed is not None
    ) else None
    with _open_store(args) as s:
        artifact = service.train_final(s, spec,
                                       test_fraction=args.test_fraction)
        if args.out:
            service.save_model(artifact, args.out)
    m = artifact.metrics
    print(f"model version {artifact.version_id}: auroc={m.auroc:.3f} "
          f"accuracy={m.accuracy:.3f} precision={m.precision:.3f} "
          f"recall={m.recall:.3f} f1={m.f1:.3f}")
    if args.out:
        print(f"artifact: {args.out}")
    return 0


def _run_protocol(args, s) -> harness.ExperimentReport:
    spec = _spec_from_args(args, _load_config(args.config))
    design = s.load_design(spec.feature_version)
    if args.protocol == "monte-carlo":
        return harness.monte_carlo_eval(spec, design, repeats=args.repeats,
                                        test_fraction=args.test_fraction)
    return harness.nested_kfold_eval(spec, design, outer_k=args.outer,
                                     inner_k=args.inner)


def _cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _open_store(args) as s:
        report = _run_protocol(args, s)
    name = f"{report.protocol}_{report.spec_fingerprint}.report.json"
    path = report.save(out_dir / name)
    harness.append_leaderboard(report, out_dir / "leaderboard.csv")
    print(f"{report.protocol}: mean AUROC {report.summary.format()} over "
          f"{report.summary.n_runs} runs "
          f"({report.summary.total_seconds:.2f}s total)")
    print(f"report: {path}")
    return 0


def _cmd_compare(args) -> int:
    a = harness.ExperimentReport.load(args.report_a)
    b = harness.ExperimentReport.load(args.report_b)
    verdict = harness.compare(a, b)
    sig = "significant" if verdict.significant else "not significant"
    print(f"means: {verdict.mean_a:.3f} vs {verdict.mean_b:.3f}")
    print(f"t = {verdict.ttest.t:.4f}, df = {verdict.ttest.df:.0f}, "
          f"p = {verdict.ttest.p_value:.4f} ({sig} at alpha=0.05)")
    print(f"runtime ratio a/b: {verdict.runtime_ratio:.2f}")
    return 0


def _cmd_sensitivity(args) -> int:
    spec = _spec_from_args(args, _load_config(args.config))
    sizes = [int(s) for s in args.sizes.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _open_store(args) as s:
        design = s.load_design(spec.feature_version)
        report = harness.size_sensitivity(spec, design, sizes,
                                          repeats=args.repeats)
    path = out_dir / f"size_sensitivity_{report.spec_fingerprint}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2))
    for size in report.sizes:
        print(f"train size {size}: AUROC {report.summaries[size].format()}")
    print(f"report: {path}")
    return 0


def _cmd_megatest(args) -> int:
    spec = _spec_from_args(args, _load_config(args.config))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _open_store(args) as s:
        design = s.load_design(spec.feature_version)
        report = harness.mega_test(spec, design, repeats=args.repeats)
    path = out_dir / f"mega_test_{report.spec_fingerprint}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2))
    import statistics
    print(f"standard mean: {statistics.mean(report.standard_aurocs):.4f} "
          f"(n per run {report.standard_sizes[0]})")
    print(f"mega mean:     {statistics.mean(report.mega_aurocs):.4f} "
          f"(n per run {report.mega_sizes[0]})")
    sig = "significant" if report.ttest.significant else "not significant"
    print(f"t-test p = {report.ttest.p_value:.4f} ({sig} at alpha=0.05)")
    print(f"report: {path}")
    return 0


def _cmd_explain(args) -> int:
    from . import explain as explain_mod

    artifact = service.load_model(args.artifact)
    with _open_store(args) as s:
        if args.global_rank:
            design = s.load_design(artifact.feature_version)
            from .encode import encode_design
            matrix = encode_design(design, artifact.maps, artifact.encoding)
            rows = matrix.values[:args.rows]
            ranking = explain_mod.global_importance(
                artifact.ensemble, rows, aggregate_onehot=args.aggregate_onehot)
            for name, value in ranking.entries:
                print(f"{name},{value:.6g}")
        else:
            if not args.cust_id:
                raise AmlRiskError("--cust-id required without --global")
            response = service.score_customer(s, artifact, args.cust_id,
                                              top_k=args.top_k)
            print(json.dumps(response.to_dict(), indent=2))
    return 0


def _cmd_serve(args) -> int:
    s = store.RelationalStore(args.db)
    artifact = service.load_model(args.artifact) if args.artifact else None
    service.serve(s, artifact=artifact, host=args.host, port=args.port,
                  token=args.token, reports_dir=args.reports_dir,
                  ui_dir=args.ui_dir)
    return 0


def _cmd_retrain(args) -> int:
    config = _load_config(args.config)
    spec = _spec_from_args(args, config) if (
        config or args.learner or args.param or args.features
    ) else None
    with _open_store(args) as s:
        if args.force:
            artifact = service.train_final(s, spec)
            print(f"retrained: model version {artifact.version_id}")
        else:
            policy = service.CmlPolicy(max_age_seconds=args.age_hours * 3600.0,
                                       change_threshold=args.changes)
            result = service.cml_tick(s, policy, spec)
            if result.error:
                print(f"retrain failed, previous model kept: {result.error}")
                return 2
            if result.retrained:
                artifact = result.artifact
                print(f"retrained ({result.reason}): model version "
                      f"{artifact.version_id}")
            else:
                print(f"no retrain: {result.reason}")
                return 0
        if args.out and artifact is not None:
            service.save_model(artifact, args.out)
            print(f"artifact: {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "ingest": _cmd_ingest,
    "explore": _cmd_explore,
    "features": _cmd_features,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "sensitivity": _cmd_sensitivity,
    "megatest": _cmd_megatest,
    "explain": _cmd_explain,
    "serve": _cmd_serve,
    "retrain": _cmd_retrain,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    trees.set_threads(args.threads)
    try:
        return _COMMANDS[args.command](args)
    except AmlRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
