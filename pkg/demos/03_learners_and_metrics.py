"""The learner ladder (decision tree -> random forest -> GBDT) on the same
split, with the metric toolkit narrating the comparison."""
import time

import numpy as np

from amlrisk import datagen, sampling, store, trees
from amlrisk.encode import EncodingMode, encode_design, fit_design_maps
from amlrisk.metrics import classification_report, summarize_runs

ds = datagen.generate_dataset(
    datagen.GenConfig(n_customers=6000, majority_ratio=0.9, seed=3))
s = store.store_from_dataset(ds)
design = s.load_design(store.V2)

split = sampling.stratified_split(design.labels, 0.25, seed=1)
maps = fit_design_maps(design, rows=split.train)
X_train = encode_design(design, maps, EncodingMode.LABEL, rows=split.train).values
X_test = encode_design(design, maps, EncodingMode.LABEL, rows=split.test).values
y_train, y_test = design.labels[split.train], design.labels[split.test]

balanced = sampling.undersample(X_train, y_train, seed=1)
print(f"train {len(y_train)} rows -> undersampled to "
      f"{len(balanced.labels)} ({int(balanced.labels.sum())} per class)\n")

models = {
    "decision tree": lambda: trees.fit_decision_tree(
        balanced.features, balanced.labels, trees.DtParams(seed=1)),
    "random forest": lambda: trees.fit_random_forest(
        balanced.features, balanced.labels,
        trees.RfParams(n_estimators=100, max_features="sqrt", seed=1)),
    "gbdt": lambda: trees.fit_gbdt(
        balanced.features, balanced.labels,
        trees.GbdtParams(n_estimators=100, learning_rate=0.2, num_leaves=31,
                         max_depth=5, reg_lambda=1.0, max_bin=255, seed=1)),
}

for name, fit in models.items():
    start = time.perf_counter()
    model = fit()
    train_s = time.perf_counter() - start
    report = classification_report(trees.predict_proba(model, X_test), y_test)
    print(f"{name:14s} AUROC {report.auroc:.3f}  acc {report.accuracy:.3f}  "
          f"prec {report.precision:.3f}  rec {report.recall:.3f}  "
          f"f1 {report.f1:.3f}  ({train_s:.2f}s)")

# randomness matters: the same GBDT over five seeds
vals, times = [], []
for seed in range(5):
    resampled = sampling.undersample(X_train, y_train, seed=seed)
    start = time.perf_counter()
    model = trees.fit_gbdt(resampled.features, resampled.labels,
                           trees.GbdtParams(n_estimators=100, num_leaves=31,
                                            learning_rate=0.2, reg_lambda=1.0,
                                            seed=seed))
    times.append(time.perf_counter() - start)
    vals.append(classification_report(
        trees.predict_proba(model, X_test), y_test).auroc)
summary = summarize_runs(vals, times)
print(f"\ngbdt over 5 resampling seeds: AUROC {summary.format()} "
      f"(mean fit {summary.mean_seconds:.2f}s)")
s.close()
