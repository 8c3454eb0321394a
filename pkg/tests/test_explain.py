import numpy as np
import pytest

from amlrisk.errors import ParameterError
from amlrisk.explain import (
    ImportanceRanking,
    brute_force_shap,
    global_importance,
    tree_shap,
)
from amlrisk.trees import (
    GbdtParams,
    RfParams,
    Tree,
    TreeEnsemble,
    fit_gbdt,
    fit_random_forest,
    predict_margin,
)


def make_stump(n_features=1, feature=0, threshold=0.5, left_value=-2.0,
               right_value=2.0, left_cover=5.0, right_cover=5.0):
    tree = Tree(feature=[feature, -1, -1],
                threshold=[threshold, np.nan, np.nan],
                left=[1, -1, -1], right=[2, -1, -1],
                value=[0.0, left_value, right_value],
                cover=[left_cover + right_cover, left_cover, right_cover])
    return TreeEnsemble(kind="DT", trees=[tree], n_features=n_features)


def random_tree(rng, n_features, depth):
    """Random binary tree with covers consistent down every path."""
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def build(d, cov):
        idx = len(feature)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(cov)
        if d == 0 or rng.uniform() < 0.25 or cov < 2:
            value[idx] = float(rng.normal())
            return idx
        feature[idx] = int(rng.integers(0, n_features))
        threshold[idx] = float(np.round(rng.uniform(-1, 1), 2))
        lc = float(int(rng.integers(1, cov)))
        li = build(d - 1, lc)
        ri = build(d - 1, cov - lc)
        left[idx], right[idx] = li, ri
        return idx

    build(depth, float(rng.integers(8, 40)))
    return Tree(feature, threshold, left, right, value, cover)


class TestTreeShapOracle:
    def test_stump_attribution(self):
        model = make_stump()
        for x, expected in [([0.0], -2.0), ([1.0], 2.0)]:
            exp = tree_shap(model, x)
            assert exp.base_value == pytest.approx(0.0)
            assert exp.attributions[0] == pytest.approx(expected)
        oracle = brute_force_shap(model, [0.0])
        assert oracle.attributions[0] == pytest.approx(-2.0, abs=1e-9)

    def test_stump_other_features_zero(self):
        model = make_stump(n_features=3)
        exp = tree_shap(model, [0.0, 9.0, -9.0])
        assert exp.attributions[1] == 0.0
        assert exp.attributions[2] == 0.0

    def test_constant_model(self):
        tree = Tree(feature=[-1], threshold=[np.nan], left=[-1], right=[-1],
                    value=[0.7], cover=[10.0])
        model = TreeEnsemble(kind="DT", trees=[tree], n_features=2)
        exp = tree_shap(model, [1.0, 2.0])
        assert np.allclose(exp.attributions, 0.0)
        assert exp.base_value == pytest.approx(0.7)

    def test_matches_brute_force_on_random_trees(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            d = int(rng.integers(1, 5))
            tree = random_tree(rng, d, depth=3)
            model = TreeEnsemble(kind="DT", trees=[tree], n_features=d)
            x = rng.uniform(-1.2, 1.2, size=d)
            fast = tree_shap(model, x)
            slow = brute_force_shap(model, x)
            assert np.allclose(fast.attributions, slow.attributions, atol=1e-9)
            assert fast.base_value == pytest.approx(slow.base_value, abs=1e-9)

    def test_matches_brute_force_on_ensembles(self):
        rng = np.random.default_rng(32)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
        model = fit_gbdt(X, y, GbdtParams(n_estimators=5, num_leaves=4,
                                          reg_lambda=1.0))
        for i in range(5):
            fast = tree_shap(model, X[i])
            slow = brute_force_shap(model, X[i])
            assert np.allclose(fast.attributions, slow.attributions, atol=1e-9)

    def test_local_accuracy_identity(self):
        rng = np.random.default_rng(33)
        X = rng.normal(size=(60, 4))
        y = rng.integers(0, 2, size=60)
        y[:2] = [0, 1]
        gbdt = fit_gbdt(X, y, GbdtParams(n_estimators=8, num_leaves=6))
        rf = fit_random_forest(X, y, RfParams(n_estimators=5, max_depth=4))
        for model in (gbdt, rf):
            margins = predict_margin(model, X)
            for i in range(10):
                exp = tree_shap(model, X[i])
                assert exp.check_local_accuracy(1e-6)
                assert exp.base_value + exp.attributions.sum() == \
                    pytest.approx(margins[i], abs=1e-6)

    def test_symmetry_on_exchangeable_features(self):
        # two features playing identical roles on a symmetric input
        tree = Tree(
            feature=[0, 1, 1, -1, -1, -1, -1],
            threshold=[0.0, 0.0, 0.0] + [np.nan] * 4,
            left=[1, 3, 5, -1, -1, -1, -1],
            right=[2, 4, 6, -1, -1, -1, -1],
            value=[0, 0, 0, 0.0, 1.0, 1.0, 2.0],
            cover=[8, 4, 4, 2, 2, 2, 2])
        model = TreeEnsemble(kind="DT", trees=[tree], n_features=2)
        exp = tree_shap(model, [1.0, 1.0])
        assert exp.attributions[0] == pytest.approx(exp.attributions[1], abs=1e-12)

    def test_dummy_feature_exactly_zero(self):
        rng = np.random.default_rng(34)
        X = rng.normal(size=(50, 3))
        y = (X[:, 0] > 0).astype(int)
        X[:, 2] = rng.normal(size=50)  # never predictive
        model = fit_gbdt(X[:, :1], y, GbdtParams(n_estimators=5))
        # widen to 3 features: the model only ever splits feature 0
        wide = TreeEnsemble(kind="GBDT", trees=model.trees, n_features=3,
                            base_score=model.base_score,
                            learning_rate=model.learning_rate)
        exp = tree_shap(wide, [0.3, 5.0, -5.0])
        assert exp.attributions[1] == 0.0
        assert exp.attributions[2] == 0.0

    def test_brute_force_refuses_13_features(self):
        model = make_stump(n_features=13)
        with pytest.raises(ParameterError):
            brute_force_shap(model, np.zeros(13))

    def test_dimension_mismatch(self):
        model = make_stump()
        with pytest.raises(ParameterError):
            tree_shap(model, [1.0, 2.0])


class TestGlobalImportance:
    def test_zero_signal_near_zero_importance(self):
        rng = np.random.default_rng(35)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 2, size=60)
        y[:2] = [0, 1]
        model = fit_gbdt(X, y, GbdtParams(n_estimators=0))
        ranking = global_importance(model, X[:20])
        assert all(v == 0.0 for _, v in ranking.entries)

    def test_planted_feature_ranks_first(self):
        rng = np.random.default_rng(36)
        X = rng.normal(size=(200, 4))
        y = (X[:, 2] > 0).astype(int)
        model = fit_gbdt(X, y, GbdtParams(n_estimators=10, num_leaves=4,
                                          reg_lambda=1.0))
        model.feature_names = ("a", "b", "signal", "d")
        ranking = global_importance(model, X[:50])
        assert ranking.entries[0][0] == "signal"

    def test_onehot_aggregation(self):
        model = make_stump(n_features=3)
        model.feature_names = ("occupation=a", "occupation=b", "age")
        ranking = global_importance(model, np.array([[0.0, 1.0, 2.0],
                                                     [1.0, 0.0, 3.0]]),
                                    aggregate_onehot=True)
        assert ranking.names() == ["occupation", "age"]

    def test_descending_order(self):
        ranking = ImportanceRanking(entries=(("a", 3.0), ("b", 1.0)))
        assert ranking.names() == ["a", "b"]
