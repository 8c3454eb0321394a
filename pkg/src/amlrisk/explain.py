"""Shapley attributions for tree ensembles.

tree_shap computes exact Shapley values of the path-dependent game: absent
features are marginalized by cover-weighted descent through each tree, in
polynomial time via the weighted-path recursion. brute_force_shap enumerates
feature subsets over the same game and serves as the verification oracle.

DT/RF attributions live in probability space (leaf values); GBDT attributions
live in margin (log-odds) space. Each explanation records its space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .trees import Tree, TreeEnsemble

VARIANT = "path_dependent_tree_shap"
MAX_BRUTE_FORCE_FEATURES = 12


@dataclass(frozen=True)
class ShapExplanation:
    attributions: np.ndarray
    base_value: float
    output: float
    space: str
    feature_names: tuple[str, ...] | None = None
    variant: str = VARIANT

    def check_local_accuracy(self, tol: float = 1e-6) -> bool:
        return abs(self.base_value + float(self.attributions.sum()) - self.output) <= tol

    def top_features(self, k: int) -> list[tuple[str, float]]:
        names = self.feature_names or tuple(
            f"f{i}" for i in range(len(self.attributions)))
        order = sorted(range(len(names)),
                       key=lambda i: (-abs(self.attributions[i]), names[i]))
        return [(names[i], float(self.attributions[i])) for i in order[:k]]

    def to_dict(self) -> dict:
        names = self.feature_names or tuple(
            f"f{i}" for i in range(len(self.attributions)))
        return {
            "base_value": self.base_value,
            "output": self.output,
            "space": self.space,
            "variant": self.variant,
            "attributions": dict(zip(names, (float(a) for a in self.attributions))),
        }


@dataclass(frozen=True)
class ImportanceRanking:
    entries: tuple[tuple[str, float], ...]

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def to_csv_rows(self) -> list[tuple[str, float]]:
        return list(self.entries)


def _tree_expectation(tree: Tree) -> float:
    """Cover-weighted mean of leaf values: v(empty set) for one tree."""
    total = tree.cover[0]
    leaves = tree.feature == -1
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / total)


def _shap_one_tree(tree: Tree, x: np.ndarray, phi: np.ndarray) -> None:
    """Weighted-path recursion: exact Shapley values of the path game."""

    def extend(pd, pz, po, pw, d_i, z_i, o_i):
        size = len(pw)
        pd = pd + [d_i]
        pz = pz + [z_i]
        po = po + [o_i]
        pw = pw + [1.0 if size == 0 else 0.0]
        for j in range(size - 1, -1, -1):
            pw[j + 1] += o_i * pw[j] * (j + 1) / (size + 1)
            pw[j] = z_i * pw[j] * (size - j) / (size + 1)
        return pd, pz, po, pw

    def unwind(pd, pz, po, pw, i):
        # inverse of extend for element i: weights re-solved over the whole
        # path, then the (d, z, o) triples above i shift down one slot
        last = len(pw) - 1
        o_i, z_i = po[i], pz[i]
        n = pw[last]
        new_w = [0.0] * last
        for j in range(last - 1, -1, -1):
            if o_i != 0.0:
                t = pw[j]
                new_w[j] = n * (last + 1) / ((j + 1) * o_i)
                n = t - new_w[j] * z_i * (last - j) / (last + 1)
            else:
                new_w[j] = pw[j] * (last + 1) / (z_i * (last - j))
        new_d = pd[:i] + pd[i + 1:]
        new_z = pz[:i] + pz[i + 1:]
        new_o = po[:i] + po[i + 1:]
        return new_d, new_z, new_o, new_w

    def unwound_sum(pd, pz, po, pw, i):
        return sum(unwind(pd, pz, po, pw, i)[3])

    def recurse(node, pd, pz, po, pw, p_z, p_o, p_i):
        pd, pz, po, pw = extend(pd, pz, po, pw, p_i, p_z, p_o)
        f = int(tree.feature[node])
        if f < 0:
            leaf_value = float(tree.value[node])
            for i in range(1, len(pw)):
                w = unwound_sum(pd, pz, po, pw, i)
                phi[pd[i]] += w * (po[i] - pz[i]) * leaf_value
            return
        thr = float(tree.threshold[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        hot, cold = (left, right) if x[f] <= thr else (right, left)
        i_z = i_o = 1.0
        k = next((i for i in range(1, len(pd)) if pd[i] == f), None)
        if k is not None:
            i_z, i_o = pz[k], po[k]
            pd, pz, po, pw = unwind(pd, pz, po, pw, k)
        r_node = float(tree.cover[node])
        recurse(hot, pd, pz, po, pw,
                i_z * float(tree.cover[hot]) / r_node, i_o, f)
        recurse(cold, pd, pz, po, pw,
                i_z * float(tree.cover[cold]) / r_node, 0.0, f)

    recurse(0, [], [], [], [], 1.0, 1.0, -1)


def _combine(model: TreeEnsemble, per_tree_phi, per_tree_base):
    if model.kind == "GBDT":
        phi = model.learning_rate * np.sum(per_tree_phi, axis=0)
        base = model.base_score + model.learning_rate * float(np.sum(per_tree_base))
        space = "margin"
    elif model.kind == "RF":
        phi = np.mean(per_tree_phi, axis=0)
        base = float(np.mean(per_tree_base))
        space = "probability"
    else:
        phi = per_tree_phi[0]
        base = float(per_tree_base[0])
        space = "probability"
    return phi, base, space


def tree_shap(model: TreeEnsemble, row) -> ShapExplanation:
    """Exact path-dependent Shapley attributions for one row."""
    x = np.asarray(row, dtype=float).ravel()
    if len(x) != model.n_features:
        raise ParameterError(
            f"row has {len(x)} features, model expects {model.n_features}")
    per_tree_phi = []
    per_tree_base = []
    for tree in model.trees:
        phi = np.zeros(model.n_features)
        _shap_one_tree(tree, x, phi)
        per_tree_phi.append(phi)
        per_tree_base.append(_tree_expectation(tree))
    phi, base, space = _combine(model, np.asarray(per_tree_phi), per_tree_base)
    return ShapExplanation(
        attributions=phi, base_value=base,
        output=base + float(phi.sum()), space=space,
        feature_names=model.feature_names)


def _cond_exp(tree: Tree, x: np.ndarray, mask: int, node: int = 0) -> float:
    """Path-dependent conditional expectation: features in the bitmask follow
    x, the rest are cover-weighted."""
    f = int(tree.feature[node])
    if f < 0:
        return float(tree.value[node])
    left, right = int(tree.left[node]), int(tree.right[node])
    if mask & (1 << f):
        child = left if x[f] <= float(tree.threshold[node]) else right
        return _cond_exp(tree, x, mask, child)
    wl = float(tree.cover[left])
    wr = float(tree.cover[right])
    return (wl * _cond_exp(tree, x, mask, left) +
            wr * _cond_exp(tree, x, mask, right)) / (wl + wr)


def brute_force_shap(model: TreeEnsemble, row) -> ShapExplanation:
    """Shapley values by subset enumeration over the same game as tree_shap.

    Refuses more than 12 features (2^d subsets).
    """
    x = np.asarray(row, dtype=float).ravel()
    d = model.n_features
    if len(x) != d:
        raise ParameterError(
            f"row has {len(x)} features, model expects {d}")
    if d > MAX_BRUTE_FORCE_FEATURES:
        raise ParameterError(
            f"brute-force enumeration refused for {d} > "
            f"{MAX_BRUTE_FORCE_FEATURES} features")
    values = np.zeros(1 << d)
    for mask in range(1 << d):
        values[mask] = sum(_cond_exp(t, x, mask) for t in model.trees)
    fact = [math.factorial(i) for i in range(d + 1)]
    phi_raw = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        for mask in range(1 << d):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[d - s - 1] / fact[d]
            phi_raw[i] += weight * (values[mask | bit] - values[mask])
    base_raw = values[0]
    if model.kind == "GBDT":
        phi = model.learning_rate * phi_raw
        base = model.base_score + model.learning_rate * base_raw
        space = "margin"
    elif model.kind == "RF":
        phi = phi_raw / len(model.trees)
        base = base_raw / len(model.trees)
        space = "probability"
    else:
        phi = phi_raw
        base = base_raw
        space = "probability"
    return ShapExplanation(
        attributions=phi, base_value=float(base),
        output=float(base + phi.sum()), space=space,
        feature_names=model.feature_names)


def global_importance(model: TreeEnsemble, rows,
                      aggregate_onehot: bool = False) -> ImportanceRanking:
    """Mean absolute attribution per feature over a row set, sorted descending.

    With aggregate_onehot, `col=category` one-hot columns merge back into
    their source column by summing importances.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("rows must be a non-empty 2-D matrix")
    totals = np.zeros(model.n_features)
    for x in X:
        totals += np.abs(tree_shap(model, x).attributions)
    means = totals / len(X)
    names = model.feature_names or tuple(f"f{i}" for i in range(model.n_features))
    scores: dict[str, float] = {}
    for name, value in zip(names, means):
        key = name.split("=", 1)[0] if (aggregate_onehot and "=" in name) else name
        scores[key] = scores.get(key, 0.0) + float(value)
    entries = tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))
    return ImportanceRanking(entries=entries)
