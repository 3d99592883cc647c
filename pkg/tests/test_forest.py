import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscoptt.errors import TargetOutOfRange, TooFewSamples
from viscoptt.forest import (
    FEATURES, ForestHyperparams, Target, Tree, ForestModel, feature_importance, fit_forest, predict,
)


def features(n, rng):
    return np.column_stack([
        rng.uniform(2.0, 6.0, n),     # inv_ptt
        rng.uniform(-8.0, -2.0, n),   # v_visco
        rng.uniform(50, 100, n),      # hr
        rng.uniform(0.5, 1.5, n),     # amp
    ])


@pytest.fixture(scope="module")
def step():
    rng = np.random.default_rng(0)
    X = features(200, rng)
    y = np.where(X[:, 0] < 4, 110.0, 140.0)
    return X, y, fit_forest(X, y, ForestHyperparams())


def test_constant_target(rng):
    X = features(30, rng)
    m = fit_forest(X, np.full(30, 120.0))
    assert np.all(predict(m, features(50, rng)) == 120.0)
    assert np.all(feature_importance(m) == 0)


def test_step_function_recovered(step):
    X, y, m = step
    assert np.mean(np.abs(predict(m, X) - y)) < 1.0
    assert abs(predict(m, [3.0, -5.0, 70.0, 1.0]) - 110.0) < 1.0
    assert feature_importance(m)[0] > 0.9


def test_more_trees_do_not_hurt(step):
    # averaging cannot be worse than the typical member: compare the forest
    # with the one-tree forests built from each of its seeds
    X, y, m = step
    forest_mae = np.mean(np.abs(predict(m, X) - y))
    singles = [np.mean(np.abs(predict(fit_forest(X, y, ForestHyperparams(n_trees=1, rng_seed=s)), X) - y))
               for s in range(100)]
    assert forest_mae <= np.mean(singles) + 1e-9


def test_single_leaf_forest():
    leaf = Tree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), np.array([100.0]))
    m = ForestModel([leaf], ForestHyperparams(n_trees=1), Target.SBP, 1, FEATURES, np.zeros(4))
    assert predict(m, [1.0, 2.0, 3.0, 4.0]) == 100.0


def test_two_informative_features():
    rng = np.random.default_rng(5)
    X = features(400, rng)
    z = (X - X.mean(0)) / X.std(0)
    y = 120 + 8 * z[:, 0] + 8 * z[:, 1]
    imp = feature_importance(fit_forest(X, y))
    assert imp[0] > 0.2 and imp[1] > 0.2
    assert imp.sum() == pytest.approx(1.0)


def test_errors(rng):
    with pytest.raises(TooFewSamples):
        fit_forest(features(1, rng), [120.0])
    with pytest.raises(TargetOutOfRange):
        fit_forest(features(10, rng), np.full(10, 300.0))
    with pytest.raises(ValueError):
        ForestHyperparams(mtry=5)


def test_tie_break_prefers_lowest_feature():
    # features 0 and 1 are identical, so every split ties
    x = np.arange(20.0)
    X = np.column_stack([x, x, np.zeros(20), np.zeros(20)])
    y = np.where(x < 10, 100.0, 150.0)
    m = fit_forest(X, y, ForestHyperparams(n_trees=1, mtry=4, bootstrap=False))
    tree = m.trees[0]
    assert tree.feature[0] == 0 and tree.threshold[0] == 9.5


@given(st.integers(0, 1000), st.integers(1, 6), st.integers(1, 5))
def test_structure_and_bounds(seed, depth, leaf):
    rng = np.random.default_rng(seed)
    n = 60
    X = features(n, rng)
    y = rng.uniform(80, 180, n)
    hp = ForestHyperparams(n_trees=5, max_depth=depth, min_samples_leaf=leaf, rng_seed=seed)
    m = fit_forest(X, y, hp)
    for t in m.trees:
        assert t.depth() <= depth
    # leaf occupancy on the bootstrap sample each tree saw
    for k, t in enumerate(m.trees):
        boot = np.random.default_rng(seed + k).integers(0, n, size=n)
        counts = np.bincount(t.apply(X[boot]), minlength=t.n_nodes)
        leaves = t.feature < 0
        assert np.all(counts[leaves] >= leaf)
    p = predict(m, features(100, rng) * rng.uniform(0.5, 2.0))
    assert np.all(p >= y.min()) and np.all(p <= y.max())
    again = fit_forest(X, y, hp)
    probe = features(20, rng)
    assert np.array_equal(predict(m, probe), predict(again, probe))
