"""From-scratch tree learners sharing one ensemble representation.

Three fit entry points cover the ladder of models used throughout the
pipeline: a CART decision tree (Gini), a bagged random forest, and a
second-order (Newton) gradient-boosted ensemble on logistic loss with
equal-frequency histogram binning, leaf-wise growth, L2 leaf regularization
and optional class weighting (`is_unbalance`).

Determinism contract: identical (X, y, params, seed) produce bit-identical
serialized models, regardless of the worker-thread cap.
"""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

_N_THREADS = 1


def set_threads(n: int) -> None:
    """Cap worker threads for split evaluation. Results never depend on it."""
    global _N_THREADS
    _N_THREADS = max(1, int(n))


@dataclass(frozen=True)
class DtParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class RfParams:
    n_estimators: int = 100
    max_features: str = "auto"
    max_depth: int | None = None
    min_samples_split: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ParameterError("n_estimators must be >= 1")
        if self.max_features not in ("auto", "sqrt", "all"):
            raise ParameterError("max_features must be 'auto', 'sqrt' or 'all'")
        if self.max_depth is not None and self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1 or None")


@dataclass(frozen=True)
class GbdtParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = -1  # None and -1 both mean unlimited
    num_leaves: int = 31
    reg_lambda: float = 0.0
    max_bin: int = 255
    is_unbalance: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is None:
            object.__setattr__(self, "max_depth", -1)
        if self.n_estimators < 0:
            raise ParameterError("n_estimators must be >= 0")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if self.num_leaves < 2:
            raise ParameterError("num_leaves must be >= 2")
        if self.max_bin < 2:
            raise ParameterError("max_bin must be >= 2")
        if self.reg_lambda < 0:
            raise ParameterError("reg_lambda must be >= 0")


class Tree:
    """One fitted tree as flat parallel arrays.

    Internal nodes route x <= threshold to `left`. Leaves carry feature=-1
    and the prediction in `value` (class-1 fraction for DT/RF, additive
    margin for GBDT). `cover` is the training-row count reaching each node.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "cover")

    def __init__(self, feature, threshold, left, right, value, cover):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=float)
        self.cover = np.asarray(cover, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        while True:
            feats = self.feature[node]
            active = np.flatnonzero(feats >= 0)
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, feats[active]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if math.isnan(t) else t for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        thr = [math.nan if t is None else t for t in d["threshold"]]
        return cls(d["feature"], thr, d["left"], d["right"], d["value"], d["cover"])


@dataclass
class TreeEnsemble:
    kind: str  # DT | RF | GBDT
    trees: list[Tree]
    n_features: int
    base_score: float = 0.0
    learning_rate: float = 1.0
    feature_names: tuple[str, ...] | None = None
    params: dict = field(default_factory=dict)
    bin_uppers: list[np.ndarray] | None = None
    train_logloss: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names) if self.feature_names else None,
            "params": self.params,
            "bin_uppers": ([u.tolist() for u in self.bin_uppers]
                           if self.bin_uppers is not None else None),
            "train_logloss": list(self.train_logloss),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        return cls(
            kind=d["kind"],
            trees=[Tree.from_dict(t) for t in d["trees"]],
            n_features=d["n_features"],
            base_score=d["base_score"],
            learning_rate=d["learning_rate"],
            feature_names=tuple(d["feature_names"]) if d.get("feature_names") else None,
            params=d.get("params", {}),
            bin_uppers=([np.asarray(u, dtype=float) for u in d["bin_uppers"]]
                        if d.get("bin_uppers") is not None else None),
            train_logloss=tuple(d.get("train_logloss", ())),
        )


def gini_impurity(labels) -> float:
    """Gini impurity 1 - sum(p_c^2) of a binary label vector."""
    y = np.asarray(labels, dtype=float)
    if len(y) == 0:
        raise ParameterError("empty label vector")
    p = float(y.mean())
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ParameterError("X must be a non-empty 2-D matrix")
    if len(y) != X.shape[0]:
        raise ParameterError("X and y row counts differ")
    if not np.all((y == 0) | (y == 1)):
        raise ParameterError("y must be binary (0/1)")
    return X, y


# ---------------------------------------------------------------------------
# CART (shared by DT and RF)
# ---------------------------------------------------------------------------

def _best_gini_split(X, y, idx, feats):
    """Best (feature, threshold, gain) over candidate features, or None.

    Gain is the Gini impurity decrease. Ties resolved toward the lowest
    feature index, then the lowest threshold.
    """
    m = len(idx)
    Xs = X[np.ix_(idx, feats)]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[idx][order]
    cum_pos = np.cumsum(ys, axis=0)
    total_pos = cum_pos[-1]
    nl = np.arange(1, m, dtype=float)[:, None]
    nr = m - nl
    lp = cum_pos[:-1]
    rp = total_pos[None, :] - lp
    pl = lp / nl
    pr = rp / nr
    parent_p = float(total_pos[0]) / m
    parent_gini = 2.0 * parent_p * (1.0 - parent_p)
    child = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / m
    gain = parent_gini - child
    gain[xs[1:] <= xs[:-1]] = -np.inf
    flat = gain.T.ravel()  # feature-major so argmax ties prefer low feature, then low threshold
    best = int(np.argmax(flat))
    best_gain = flat[best]
    if not best_gain > 0.0:
        return None
    fi, bi = divmod(best, m - 1)
    feature = int(feats[fi])
    threshold = float((xs[bi, fi] + xs[bi + 1, fi]) / 2.0)
    return feature, threshold, float(best_gain)


def _grow_cart(X, y, max_depth, min_samples_split, n_candidates, rng):
    d = X.shape[1]
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        m = len(idx)
        pos = int(np.sum(y[idx]))
        value[node] = pos / m
        cover[node] = float(m)
        if pos in (0, m) or m < min_samples_split or (
                max_depth is not None and depth >= max_depth):
            continue
        if n_candidates >= d:
            feats = np.arange(d)
        else:
            feats = np.sort(rng.choice(d, size=n_candidates, replace=False))
        found = _best_gini_split(X, y, idx, feats)
        if found is None:
            continue
        f, thr, _ = found
        mask = X[idx, f] <= thr
        if not mask.any() or mask.all():  # threshold collapsed onto a data value
            continue
        feature[node] = f
        threshold[node] = thr
        li, ri = new_node(), new_node()
        left[node], right[node] = li, ri
        stack.append((ri, idx[~mask], depth + 1))
        stack.append((li, idx[mask], depth + 1))
    return Tree(feature, threshold, left, right, value, cover)


def fit_decision_tree(X, y, p: DtParams | None = None) -> TreeEnsemble:
    """Greedy CART with Gini impurity; leaf value is the class-1 fraction."""
    p = p or DtParams()
    X, y = _check_xy(X, y)
    rng = np.random.default_rng(p.seed)
    tree = _grow_cart(X, y, p.max_depth, p.min_samples_split, X.shape[1], rng)
    return TreeEnsemble(kind="DT", trees=[tree], n_features=X.shape[1],
                        params={"learner": "dt", **_params_dict(p)})


def fit_random_forest(X, y, p: RfParams | None = None) -> TreeEnsemble:
    """Bagged CART forest; prediction is the mean of tree leaf fractions.

    Bootstrap samples of size n with replacement; per-split candidate
    features are sqrt(d) for 'auto'/'sqrt' and d for 'all'.
    """
    p = p or RfParams()
    X, y = _check_xy(X, y)
    n, d = X.shape
    n_candidates = d if p.max_features == "all" else max(1, int(math.sqrt(d)))
    master = np.random.default_rng(p.seed)
    trees = []
    for _ in range(p.n_estimators):
        tree_rng = np.random.default_rng(master.integers(0, 2**63 - 1))
        boot = tree_rng.integers(0, n, size=n)
        trees.append(_grow_cart(X[boot], y[boot], p.max_depth,
                                p.min_samples_split, n_candidates, tree_rng))
    return TreeEnsemble(kind="RF", trees=trees, n_features=d,
                        params={"learner": "rf", **_params_dict(p)})


# ---------------------------------------------------------------------------
# Histogram GBDT (Newton boosting on logistic loss)
# ---------------------------------------------------------------------------

def _quantile_bin_uppers(col: np.ndarray, max_bin: int) -> np.ndarray:
    """Upper boundaries of equal-frequency bins (bin b covers v <= uppers[b])."""
    uniq = np.unique(col)
    if len(uniq) <= max_bin:
        return uniq
    probs = np.arange(1, max_bin) / max_bin
    cuts = np.quantile(col, probs)
    return np.unique(np.concatenate([cuts, uniq[-1:]]))


def _bin_column(col: np.ndarray, uppers: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(uppers, col, side="left"),
                      len(uppers) - 1).astype(np.uint16)


def _node_histograms(binned, rows, g, h, n_bins, pool):
    d = binned.shape[1]
    sub = binned[rows]
    gr = g[rows]
    hr = h[rows]

    def one(f):
        bf = sub[:, f]
        return (np.bincount(bf, weights=gr, minlength=n_bins),
                np.bincount(bf, weights=hr, minlength=n_bins),
                np.bincount(bf, minlength=n_bins))

    if pool is None:
        results = [one(f) for f in range(d)]
    else:
        results = list(pool.map(one, range(d)))
    G = np.stack([r[0] for r in results])
    H = np.stack([r[1] for r in results])
    C = np.stack([r[2] for r in results])
    return G, H, C


def _best_hist_split(G, H, C, reg_lambda):
    """Best (gain, feature, bin) by the second-order gain formula, or None."""
    g_tot = float(G[0].sum())
    h_tot = float(H[0].sum())
    parent = g_tot * g_tot / (h_tot + reg_lambda) if (h_tot + reg_lambda) > 0 else 0.0
    GL = np.cumsum(G, axis=1)[:, :-1]
    HL = np.cumsum(H, axis=1)[:, :-1]
    CL = np.cumsum(C, axis=1)[:, :-1]
    GR = g_tot - GL
    HR = h_tot - HL
    CR = C[0].sum() - CL
    valid = (CL > 0) & (CR > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent)
    gain = np.where(valid, gain, -np.inf)
    flat = gain.ravel()  # feature-major: ties prefer low feature, then low bin
    best = int(np.argmax(flat))
    if not flat[best] > 0.0:
        return None
    f, b = divmod(best, gain.shape[1])
    return float(flat[best]), int(f), int(b)


class _GbdtNode:
    __slots__ = ("rows", "depth", "G", "H", "C", "g_sum", "h_sum", "split", "node_id")

    def __init__(self, rows, depth, G, H, C, node_id):
        self.rows = rows
        self.depth = depth
        self.G, self.H, self.C = G, H, C
        self.g_sum = float(G[0].sum())
        self.h_sum = float(H[0].sum())
        self.split = None
        self.node_id = node_id


def _grow_gbdt_tree(binned, uppers, g, h, p: GbdtParams, pool):
    n_bins = max(len(u) for u in uppers)
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    def finalize_leaf(node: _GbdtNode):
        value[node.node_id] = -node.g_sum / (node.h_sum + p.reg_lambda)
        cover[node.node_id] = float(len(node.rows))

    def candidate(node: _GbdtNode):
        if p.max_depth >= 1 and node.depth >= p.max_depth:
            return None
        return _best_hist_split(node.G, node.H, node.C, p.reg_lambda)

    rows = np.arange(binned.shape[0])
    G, H, C = _node_histograms(binned, rows, g, h, n_bins, pool)
    root = _GbdtNode(rows, 0, G, H, C, new_node())
    cover[root.node_id] = float(len(rows))
    root.split = candidate(root)
    heap = []
    counter = 0
    if root.split is not None:
        heapq.heappush(heap, (-root.split[0], counter, root))
        counter += 1
    n_leaves = 1
    leaves = {root.node_id: root}
    while heap and n_leaves < p.num_leaves:
        _, _, node = heapq.heappop(heap)
        gain, f, b = node.split
        thr = float(uppers[f][b])
        mask = binned[node.rows, f] <= b
        rows_l, rows_r = node.rows[mask], node.rows[~mask]
        feature[node.node_id] = f
        threshold[node.node_id] = thr
        li, ri = new_node(), new_node()
        left[node.node_id], right[node.node_id] = li, ri
        # histogram trick: build the smaller child directly, subtract for the other
        if len(rows_l) <= len(rows_r):
            GL, HL, CL = _node_histograms(binned, rows_l, g, h, n_bins, pool)
            GR, HR, CR = node.G - GL, node.H - HL, node.C - CL
        else:
            GR, HR, CR = _node_histograms(binned, rows_r, g, h, n_bins, pool)
            GL, HL, CL = node.G - GR, node.H - HR, node.C - CR
        child_l = _GbdtNode(rows_l, node.depth + 1, GL, HL, CL, li)
        child_r = _GbdtNode(rows_r, node.depth + 1, GR, HR, CR, ri)
        cover[li] = float(len(rows_l))
        cover[ri] = float(len(rows_r))
        del leaves[node.node_id]
        leaves[li] = child_l
        leaves[ri] = child_r
        n_leaves += 1
        for child in (child_l, child_r):
            child.split = candidate(child)
            if child.split is not None:
                heapq.heappush(heap, (-child.split[0], counter, child))
                counter += 1
    leaf_rows = []
    for node in leaves.values():
        finalize_leaf(node)
        leaf_rows.append((node.node_id, node.rows))
    tree = Tree(feature, threshold, left, right, value, cover)
    return tree, leaf_rows


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def fit_gbdt(X, y, p: GbdtParams | None = None) -> TreeEnsemble:
    """Newton boosting on logistic loss over histogram-binned features.

    Per iteration: g = p - y and h = p(1-p) (positive rows scaled by the
    negative/positive count ratio under is_unbalance), splits maximize
    0.5*[G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)], leaves take -G/(H+l),
    trees grow best-first until num_leaves or max_depth. The base score is
    the log-odds of the weighted training positive rate.
    """
    p = p or GbdtParams()
    X, y = _check_xy(X, y)
    n, d = X.shape
    n_pos = int(np.sum(y == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("GBDT requires both classes (log-odds prior undefined)")
    w = np.ones(n)
    if p.is_unbalance:
        w[y == 1] = n_neg / n_pos
    w_sum = float(w.sum())
    wp = float(np.sum(w * y)) / w_sum
    base = math.log(wp / (1.0 - wp))

    uppers = [_quantile_bin_uppers(X[:, f], p.max_bin) for f in range(d)]
    binned = np.column_stack([_bin_column(X[:, f], uppers[f]) for f in range(d)])

    pool = ThreadPoolExecutor(max_workers=_N_THREADS) if _N_THREADS > 1 else None
    yf = y.astype(float)
    F = np.full(n, base)
    trees = []
    losses = []
    try:
        for _ in range(p.n_estimators):
            prob = _sigmoid(F)
            g = w * (prob - yf)
            h = w * prob * (1.0 - prob)
            tree, leaf_rows = _grow_gbdt_tree(binned, uppers, g, h, p, pool)
            for node_id, rows in leaf_rows:
                F[rows] += p.learning_rate * tree.value[node_id]
            trees.append(tree)
            prob = np.clip(_sigmoid(F), 1e-15, 1.0 - 1e-15)
            losses.append(float(-np.sum(
                w * (yf * np.log(prob) + (1.0 - yf) * np.log(1.0 - prob))) / w_sum))
    finally:
        if pool is not None:
            pool.shutdown()
    return TreeEnsemble(kind="GBDT", trees=trees, n_features=d,
                        base_score=base, learning_rate=p.learning_rate,
                        params={"learner": "gbdt", **_params_dict(p)},
                        bin_uppers=uppers, train_logloss=tuple(losses))


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict_margin(model: TreeEnsemble, X) -> np.ndarray:
    """Raw model output: probability for DT/RF, additive log-odds for GBDT."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ParameterError(
            f"X must have {model.n_features} columns, got {X.shape[1] if X.ndim == 2 else 'non-2D'}")
    if model.kind == "GBDT":
        out = np.full(len(X), model.base_score)
        for tree in model.trees:
            out += model.learning_rate * tree.predict_value(X)
        return out
    if model.kind == "RF":
        out = np.zeros(len(X))
        for tree in model.trees:
            out += tree.predict_value(X)
        return out / len(model.trees)
    return model.trees[0].predict_value(X)


def predict_proba(model: TreeEnsemble, X) -> np.ndarray:
    """Class-1 probability per row."""
    margin = predict_margin(model, X)
    if model.kind == "GBDT":
        return _sigmoid(margin)
    return margin


def _params_dict(p) -> dict:
    d = {}
    for k in p.__dataclass_fields__:
        d[k] = getattr(p, k)
    return d
