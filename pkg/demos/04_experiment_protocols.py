"""The experiment protocols end to end: Monte Carlo vs nested K-fold, grid
search, imbalance strategies, dataset-size sensitivity, and the mega test."""
import numpy as np

from amlrisk import datagen, store
from amlrisk.harness import (
    GridSpec,
    PipelineSpec,
    compare,
    mega_test,
    monte_carlo_eval,
    nested_kfold_eval,
    size_sensitivity,
)

ds = datagen.generate_dataset(
    datagen.GenConfig(n_customers=6000, majority_ratio=0.95, seed=23))
s = store.store_from_dataset(ds)
design = s.load_design(store.V2)

gbdt = {"n_estimators": 40, "learning_rate": 0.2, "num_leaves": 15,
        "max_depth": 5, "reg_lambda": 1.0, "max_bin": 127}

print("== imbalance strategies (Monte Carlo, 10 repeats each) ==")
reports = {}
for strategy in ("none", "undersample_dev", "oversample_dev", "class_weight"):
    spec = PipelineSpec(learner="gbdt", params=dict(gbdt),
                        imbalance=strategy, seed=4)
    reports[strategy] = monte_carlo_eval(spec, design, repeats=10)
    r = reports[strategy]
    print(f"  {strategy:16s} AUROC {r.summary.format()}  "
          f"({r.summary.total_seconds:.1f}s)")
verdict = compare(reports["undersample_dev"], reports["none"])
print(f"  undersample vs none: p = {verdict.ttest.p_value:.3f} "
      f"({'significant' if verdict.significant else 'not significant'})")

print("\n== Monte Carlo vs nested 10-fold (fixed hyperparameters) ==")
spec = PipelineSpec(learner="gbdt", params=dict(gbdt),
                    imbalance="undersample_dev", seed=9)
mc = monte_carlo_eval(spec, design, repeats=30)
kf = nested_kfold_eval(spec, design, outer_k=10, inner_k=10)
v = compare(mc, kf)
print(f"  monte carlo : {mc.summary.format()} in {mc.summary.total_seconds:.1f}s")
print(f"  nested kfold: {kf.summary.format()} in {kf.summary.total_seconds:.1f}s")
print(f"  p = {v.ttest.p_value:.3f}, runtime ratio {v.runtime_ratio:.1f}x")

print("\n== grid search inside nested K-fold ==")
grid = GridSpec({"n_estimators": [20, 40], "learning_rate": [0.1, 0.2]})
tuned = PipelineSpec(learner="gbdt", params=dict(gbdt), grid=grid,
                     imbalance="undersample_dev", seed=9)
report = nested_kfold_eval(tuned, design, outer_k=4, inner_k=3)
print(f"  outer AUROC {report.summary.format()} with "
      f"{report.grid_fit_count} grid fits")
for fold, params in enumerate(report.extras["chosen_params"]):
    print(f"  fold {fold}: chose {params}")

print("\n== dataset-size sensitivity ==")
sizes = [500, 1000, 2000, 4000]
sens = size_sensitivity(spec, design, sizes, repeats=3)
for size in sens.sizes:
    print(f"  train size {size:5d}: AUROC {sens.summaries[size].format()}")

print("\n== mega test (test fold + rows discarded by undersampling) ==")
mega = mega_test(spec, design, repeats=8)
print(f"  standard ({mega.standard_sizes[0]} rows): "
      f"{np.mean(mega.standard_aurocs):.4f}")
print(f"  mega     ({mega.mega_sizes[0]} rows): "
      f"{np.mean(mega.mega_aurocs):.4f}")
print(f"  p = {mega.ttest.p_value:.3f} "
      f"({'significant' if mega.ttest.significant else 'not significant'})")
s.close()
