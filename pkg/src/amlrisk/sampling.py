"""Data splitting and class-imbalance resampling.

All operations are pure and deterministic for a given seed. Index arrays
always refer to row positions in the caller's arrays.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StratificationError


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        if np.intersect1d(self.train, self.test).size:
            raise ParameterError("train and test indices overlap")


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]
    stratified: bool
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, test) indices with fold i held out."""
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test


@dataclass(frozen=True)
class ResampledSet:
    """Resampled (features, labels) plus provenance.

    `indices` maps each output row to its source row in the input, with -1
    for synthetic rows. SMOTE additionally records, per synthetic row, the
    input index of the interpolation source and of the chosen neighbor.
    """
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray
    synthetic_sources: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    synthetic_neighbors: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def _as_xy(features, labels):
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2:
        raise ParameterError("features must be a 2-D matrix")
    if len(y) != X.shape[0]:
        raise ParameterError("features and labels row counts differ")
    return X, y


def _class_indices(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    neg = np.flatnonzero(y == 0)
    pos = np.flatnonzero(y == 1)
    if neg.size == 0 or pos.size == 0:
        raise StratificationError("both classes must be present")
    return neg, pos


def stratified_split(labels, test_fraction: float, seed: int) -> SplitIndices:
    """Single stratified holdout split.

    Per-class test counts are round(class_count * test_fraction), then
    adjusted (largest fractional remainder first) so the total equals
    round(n * test_fraction). A class left with zero test rows triggers a
    warning rather than an error.
    """
    y = np.asarray(labels, dtype=int)
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError("test_fraction must be in (0, 1)")
    classes = [np.flatnonzero(y == c) for c in np.unique(y)]
    if len(classes) < 2:
        raise StratificationError("stratified split needs at least two classes")
    n = len(y)
    target = int(round(n * test_fraction))
    target = min(max(target, 1), n - 1)
    counts = [int(round(len(c) * test_fraction)) for c in classes]
    remainders = [len(c) * test_fraction - cnt for c, cnt in zip(classes, counts)]
    order = sorted(range(len(classes)), key=lambda i: (-remainders[i], i))
    while sum(counts) < target:
        for i in order:
            if counts[i] < len(classes[i]) and sum(counts) < target:
                counts[i] += 1
    while sum(counts) > target:
        for i in reversed(order):
            if counts[i] > 0 and sum(counts) > target:
                counts[i] -= 1
    if any(c == 0 for c in counts):
        warnings.warn("stratified split left a class with no test rows", stacklevel=2)
    rng = np.random.default_rng(seed)
    test_parts = []
    for cls_idx, cnt in zip(classes, counts):
        perm = rng.permutation(cls_idx)
        test_parts.append(perm[:cnt])
    test = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return SplitIndices(train=np.flatnonzero(mask), test=test, seed=seed)


def kfold_plan(labels, k: int, stratified: bool, seed: int) -> FoldPlan:
    """K disjoint folds covering every index, sizes within 1 of each other.

    Stratified folds keep per-class counts within 1 sample of proportional.
    """
    y = np.asarray(labels, dtype=int)
    n = len(y)
    if k < 2:
        raise ParameterError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    if stratified:
        for c in np.unique(y):
            cls = np.flatnonzero(y == c)
            if len(cls) < k:
                raise StratificationError(
                    f"class {c} has {len(cls)} rows, fewer than k={k}")
        ptr = 0
        for c in np.unique(y):
            cls = rng.permutation(np.flatnonzero(y == c))
            base, extra = divmod(len(cls), k)
            sizes = [base + (1 if (f - ptr) % k < extra else 0) for f in range(k)]
            offset = 0
            for f in range(k):
                folds[f].extend(cls[offset:offset + sizes[f]])
                offset += sizes[f]
            ptr = (ptr + extra) % k
    else:
        perm = rng.permutation(n)
        base, extra = divmod(n, k)
        offset = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            folds[f].extend(perm[offset:offset + size])
            offset += size
    return FoldPlan(
        folds=tuple(np.sort(np.asarray(f, dtype=int)) for f in folds),
        stratified=stratified, seed=seed)


def undersample(features, labels, seed: int) -> ResampledSet:
    """Balance classes by dropping majority rows uniformly without replacement.

    Minority rows are kept untouched; output classes are equal-sized at the
    minority count. Row order follows the original row order.
    """
    X, y = _as_xy(features, labels)
    neg, pos = _class_indices(y)
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(majority, size=len(minority), replace=False)
    kept = np.sort(np.concatenate([minority, chosen]))
    return ResampledSet(features=X[kept], labels=y[kept], indices=kept)


def oversample(features, labels, seed: int) -> ResampledSet:
    """Balance classes by replicating minority rows (uniform, with replacement)."""
    X, y = _as_xy(features, labels)
    neg, pos = _class_indices(y)
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    extra = rng.choice(minority, size=len(majority) - len(minority), replace=True)
    idx = np.concatenate([np.arange(len(y)), extra])
    return ResampledSet(features=X[idx], labels=y[idx], indices=idx)


def smote(features, labels, k_neighbors: int = 5, seed: int = 0) -> ResampledSet:
    """SMOTE: synthesize minority rows along segments to nearest minority neighbors.

    Each synthetic row is x + u * (x_nn - x) with x a minority row, x_nn one
    of its k nearest minority neighbors (Euclidean), u uniform on [0, 1].
    Output classes are equal-sized at the majority count.
    """
    X, y = _as_xy(features, labels)
    if k_neighbors < 1:
        raise ParameterError("k_neighbors must be >= 1")
    neg, pos = _class_indices(y)
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    m = len(minority)
    if m <= k_neighbors:
        raise ParameterError(
            f"minority count {m} must exceed k_neighbors={k_neighbors}")
    needed = len(majority) - m
    rng = np.random.default_rng(seed)
    if needed == 0:
        return ResampledSet(features=X.copy(), labels=y.copy(),
                            indices=np.arange(len(y)))
    Xm = X[minority]
    # pairwise Euclidean among minority rows; self excluded by masking
    sq = np.sum(Xm * Xm, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Xm @ Xm.T)
    np.fill_diagonal(d2, np.inf)
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k_neighbors]
    src = rng.integers(0, m, size=needed)
    pick = rng.integers(0, k_neighbors, size=needed)
    u = rng.uniform(0.0, 1.0, size=needed)
    nbr = nn[src, pick]
    synth = Xm[src] + u[:, None] * (Xm[nbr] - Xm[src])
    minority_label = int(y[minority[0]])
    feats = np.vstack([X, synth])
    labs = np.concatenate([y, np.full(needed, minority_label, dtype=int)])
    idx = np.concatenate([np.arange(len(y)), np.full(needed, -1, dtype=int)])
    return ResampledSet(
        features=feats, labels=labs, indices=idx,
        synthetic_sources=minority[src], synthetic_neighbors=minority[nbr])


def stratified_subsample(labels, size: int, seed: int) -> np.ndarray:
    """Indices of a stratified subsample with per-class proportional rounding."""
    y = np.asarray(labels, dtype=int)
    n = len(y)
    if not 0 < size <= n:
        raise ParameterError(f"subsample size {size} out of range 1..{n}")
    if size == n:
        return np.arange(n)
    frac = size / n
    classes = [np.flatnonzero(y == c) for c in np.unique(y)]
    counts = [int(round(len(c) * frac)) for c in classes]
    order = sorted(range(len(classes)),
                   key=lambda i: (-(len(classes[i]) * frac - counts[i]), i))
    while sum(counts) < size:
        for i in order:
            if counts[i] < len(classes[i]) and sum(counts) < size:
                counts[i] += 1
    while sum(counts) > size:
        for i in reversed(order):
            if counts[i] > 1 and sum(counts) > size:
                counts[i] -= 1
    rng = np.random.default_rng(seed)
    parts = [rng.permutation(c)[:cnt] for c, cnt in zip(classes, counts)]
    return np.sort(np.concatenate(parts))
