import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfca.learners import ModelSpec, fit, load_model, predict, save_model
from sfca.learners.ensembles import fit_bagging, fit_single_tree, vote_fraction
from sfca.learners.linear import (
    destandardize,
    fit_lasso,
    fit_linear_svm,
    fit_logistic_ridge,
    fit_ols,
    fit_ridge,
    lambda_max,
    standardize,
)


def _xor(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)
    return X, y


def test_tree_solves_xor_at_depth_two():
    # repeated corner points with unequal counts: the first split has a
    # strictly positive gain and every candidate threshold lies between corners
    centres = [((1, 1), 0.0, 40), ((1, -1), 1.0, 20), ((-1, 1), 1.0, 20), ((-1, -1), 0.0, 10)]
    X = np.vstack([np.tile(c, (k, 1)) for c, _, k in centres]).astype(float)
    y = np.concatenate([np.full(k, v) for _, v, k in centres])
    trees = fit_single_tree(X, y, np.ones(len(y)), max_depth=2, min_leaf=1)
    assert np.array_equal(trees.leaf_values(X)[0] > 0.5, y > 0.5)


def test_duplicated_row_equals_double_weight_tree():
    X, y = _xor(60, seed=1)
    w = np.ones(len(y))
    w[0] = 2.0
    Xd = np.vstack([X, X[:1]])
    yd = np.concatenate([y, y[:1]])
    a = fit_single_tree(X, y, w, max_depth=3, min_leaf=1).leaf_values(X)
    b = fit_single_tree(Xd, yd, np.ones(len(yd)), max_depth=3, min_leaf=1).leaf_values(X)
    assert np.allclose(a, b)


def test_duplicated_row_equals_double_weight_ols():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=30)
    w = np.ones(30)
    w[4] = 2.0
    a = fit_ols(X, y, w)
    b = fit_ols(np.vstack([X, X[4:5]]), np.append(y, y[4]))
    assert np.allclose(a[0], b[0]) and np.isclose(a[1], b[1])


def test_standardize_roundtrip():
    rng = np.random.default_rng(3)
    X = rng.normal(5, 3, size=(40, 4))
    X[:, 3] = 7.0
    Z, mu, sd, const = standardize(X)
    assert list(const) == [False, False, False, True] and np.all(Z[:, 3] == 0)
    X, Z, mu, sd = X[:, :3], Z[:, :3], mu[:3], sd[:3]
    assert np.allclose(Z.mean(axis=0), 0) and np.allclose(Z.std(axis=0), 1)
    assert np.allclose(destandardize(Z, mu, sd), X)


def test_ridge_shrinks_with_lambda():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 5))
    y = X @ np.arange(1.0, 6.0) + rng.normal(size=50)
    norms = [np.linalg.norm(fit_ridge(X, y, lam)[0]) for lam in (0.0, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_lasso_above_lambda_max_is_empty():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 6))
    y = X[:, 0] * 3 + rng.normal(size=40)
    lm = lambda_max(X, y)
    coef, b0, _ = fit_lasso(X, y, lm * 1.01)
    assert np.all(coef == 0) and b0 == pytest.approx(y.mean())
    coef, _, _ = fit_lasso(X, y, lm * 0.5)
    assert coef[0] != 0


def test_logistic_ridge_separates():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] - X[:, 1] > 0).astype(float)
    coef, b = fit_logistic_ridge(X, y, 0.01)
    assert np.mean(((X @ coef + b) > 0) == (y > 0)) > 0.95


def test_svm_platt_scores_are_ordered():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] > 0).astype(float)
    coef, b, a, c = fit_linear_svm(X, y, 1e-3)
    assert coef[0] > abs(coef[1])
    assert a > 0  # larger margin, larger class-1 probability


def test_bagging_oob_error_is_small_across_seeds():
    X, y = _xor(300, seed=8)
    errs = []
    for seed in range(10):
        trees, counts = fit_bagging(X, y, np.ones(len(y)), n_trees=25, min_leaf=1, mtry=2,
                                    classification=True, seed=seed)
        leaves = trees.leaf_values(X)
        oob = counts == 0
        votes = np.where(leaves > 0.5, 1.0, 0.0)
        num = (votes * oob).sum(axis=0)
        den = oob.sum(axis=0)
        ok = den > 0
        errs.append(np.mean((num[ok] / den[ok] > 0.5) != (y[ok] > 0.5)))
    assert np.mean(errs) < 0.08


def test_bagging_thread_count_does_not_change_trees():
    X, y = _xor(120, seed=9)
    a, ca = fit_bagging(X, y, np.ones(len(y)), n_trees=12, classification=True, seed=3, n_jobs=1)
    b, cb = fit_bagging(X, y, np.ones(len(y)), n_trees=12, classification=True, seed=3, n_jobs=4)
    assert np.array_equal(ca, cb)
    for k, v in a.as_dict().items():
        assert np.array_equal(v, b.as_dict()[k])


def test_vote_fraction_ties_count_half():
    leaves = np.array([[1.0, 0.5], [0.0, 0.5], [0.7, 0.2]])
    assert np.allclose(vote_fraction(leaves), [2 / 3, (0.5 + 0.5 + 0) / 3])


def test_identical_trees_match_single_tree():
    # with no bootstrap variability (one row per distinct point, huge weights
    # do not matter) a forest of one tree votes like that tree
    X, y = _xor(80, seed=10)
    spec = ModelSpec("c-tree-bag", n_trees=1, seed=0)
    m = fit(spec, X, y)
    s = predict(m, X).scores
    assert set(np.unique(s)) <= {0.0, 0.5, 1.0}


@pytest.mark.parametrize("family", [
    "ols", "ridge", "lasso", "r-tree", "r-tree-bag", "r-tree-boost",
    "c-tree-bag", "c-tree-boost", "logr-ridge", "logr-lasso", "svm-linear",
])
def test_model_json_roundtrip(tmp_path, family):
    X, y = _xor(80, seed=11)
    spec = ModelSpec(family, n_trees=5 if "tree" in family and family != "r-tree" else None, seed=2)
    m = fit(spec, X, y)
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert back.spec == m.spec.resolved() or back.spec == m.spec
    assert np.array_equal(predict(m, X).scores, predict(back, X).scores)


def test_classifier_scores_in_unit_interval():
    X, y = _xor(80, seed=12)
    for fam in ("c-tree-bag", "c-tree-boost", "logr-ridge", "logr-lasso", "svm-linear"):
        s = predict(fit(ModelSpec(fam, n_trees=5 if "tree" in fam else None), X, y), X).scores
        assert s.min() >= 0 and s.max() <= 1


def test_classifier_rejects_non_boolean_target():
    with pytest.raises(ValueError):
        fit(ModelSpec("c-tree-bag"), np.zeros((3, 1)), [0, 1, 2])


def test_predict_rejects_wrong_width():
    m = fit(ModelSpec("ols"), np.eye(3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        predict(m, np.zeros((2, 4)))


@pytest.mark.parametrize("label,family,weighted", [
    ("c-tree(bg)(w)", "c-tree-bag", True), ("svm", "svm-linear", False), ("lasso", "lasso", False),
])
def test_labels_parse(label, family, weighted):
    s = ModelSpec.from_label(label)
    assert (s.family, s.weighted, s.label) == (family, weighted, label)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_fit_is_deterministic_for_a_seed(seed):
    X, y = _xor(60, seed=13)
    spec = ModelSpec("c-tree-boost", n_trees=5, seed=seed)
    a = predict(fit(spec, X, y), X).scores
    b = predict(fit(spec, X, y), X).scores
    assert np.array_equal(a, b)


def test_bagging_beats_mean_oob_tree_error():
    # ensemble training MSE against the mean out-of-bag MSE of its trees
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        X = rng.uniform(-2, 2, size=(200, 3))
        y = np.sin(2 * X[:, 0]) + X[:, 1] ** 2 + rng.normal(0, 0.3, 200)
        trees, counts = fit_bagging(X, y, np.ones(200), n_trees=30, min_leaf=5, seed=seed)
        leaves = trees.leaf_values(X)
        ens_mse = np.mean((leaves.mean(axis=0) - y) ** 2)
        oob = counts == 0
        tree_oob = [np.mean((leaves[k, oob[k]] - y[oob[k]]) ** 2) for k in range(30) if oob[k].any()]
        wins += ens_mse <= np.mean(tree_oob)
    assert wins == 10


@pytest.mark.parametrize("fitter", [
    lambda X, y, w: fit_ridge(X, y, 2.0, w),
    lambda X, y, w: fit_logistic_ridge(X, (y > 0).astype(float), 0.1, w),
])
def test_duplicated_row_equals_double_weight_penalized(fitter):
    rng = np.random.default_rng(14)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -1.0, 0.5] + rng.normal(size=40)
    w = np.ones(40)
    w[7] = 2.0
    a = fitter(X, y, w)
    b = fitter(np.vstack([X, X[7:8]]), np.append(y, y[7]), np.ones(41))
    assert np.allclose(a[0], b[0], atol=1e-7) and np.isclose(a[1], b[1], atol=1e-7)
