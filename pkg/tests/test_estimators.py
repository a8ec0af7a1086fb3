import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from regnet import RegressionNetworkClassifier, RegressionNetworkRegressor

FAST = dict(hidden=(8,), residual_hidden=(8,), max_epochs=20, patience=5, batch_size=64, learning_rate=0.01)


def regression_data(n=500, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 3))
    return X, 3.0 * X[:, 0] - X[:, 1] + 10.0


def test_get_params_round_trip():
    est = RegressionNetworkRegressor(k_max=1, residual=True)
    params = est.get_params()
    assert params["k_max"] == 1 and params["residual"] is True and params["random_state"] == 42
    assert clone(est).get_params() == params
    assert est.set_params(k_max=2).k_max == 2


@pytest.mark.parametrize("est", [RegressionNetworkRegressor(), RegressionNetworkClassifier()])
def test_predict_before_fit(est):
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 3)))
    with pytest.raises(NotFittedError):
        est.decompose(np.zeros((2, 3)))


def test_regressor_fits_in_target_units():
    X, y = regression_data()
    est = RegressionNetworkRegressor(k_max=1, **FAST).fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (500,)
    assert abs(pred.mean() - y.mean()) < 0.5
    assert est.score(X, y) > 0.9
    assert est.n_features_in_ == 3


def test_regressor_is_deterministic():
    X, y = regression_data()
    a = RegressionNetworkRegressor(k_max=1, **FAST).fit(X, y).predict(X)
    b = RegressionNetworkRegressor(k_max=1, **FAST).fit(X, y).predict(X)
    assert np.array_equal(a, b)


def test_decompose_names_and_sum():
    X, y = regression_data(300)
    est = RegressionNetworkRegressor(k_max=2, **dict(FAST, max_epochs=3)).fit(X, y)
    parts = est.decompose(X[:10])
    assert ("x0",) in parts and ("x0", "x2") in parts
    # contributions live in standardized target units
    standardized = est.preprocessor_.transform_target(est.predict(X[:10]))
    np.testing.assert_allclose(sum(parts.values()), standardized, atol=1e-9)


def test_shape_function_export():
    X, y = regression_data(300)
    est = RegressionNetworkRegressor(k_max=2, **dict(FAST, max_epochs=3)).fit(X, y)
    assert est.shape_function("x1", 11).values.shape == (11,)
    assert est.interaction_function(("x0", "x1"), 5).values.shape == (5, 5)


def test_wrong_feature_count():
    X, y = regression_data(200)
    est = RegressionNetworkRegressor(k_max=1, **dict(FAST, max_epochs=2)).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :2])


def test_categorical_column_by_index():
    rng = np.random.default_rng(1)
    cat = rng.integers(0, 3, 400)
    X = np.column_stack([rng.normal(size=400), cat]).astype(object)
    y = np.array([0.0, 5.0, -5.0])[cat] + X[:, 0].astype(float)
    est = RegressionNetworkRegressor(k_max=1, categorical_features=[1], **FAST).fit(X, y)
    assert est.model_.schema[1].width == 3
    assert est.score(X, y) > 0.9


def test_usable_in_cross_validation():
    X, y = regression_data(300)
    scores = cross_val_score(RegressionNetworkRegressor(k_max=1, **dict(FAST, max_epochs=5)), X, y, cv=3)
    assert scores.shape == (3,)


def test_classifier():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(600, 2))
    labels = np.where(X[:, 0] + 0.5 * X[:, 1] > 0, "pos", "neg")
    clf = RegressionNetworkClassifier(k_max=1, **FAST).fit(X, labels)
    assert list(clf.classes_) == ["neg", "pos"]
    proba = clf.predict_proba(X)
    assert proba.shape == (600, 2) and np.allclose(proba.sum(axis=1), 1.0)
    assert set(clf.predict(X)) <= {"neg", "pos"}
    assert clf.score(X, labels) > 0.9


def test_classifier_rejects_multiclass():
    with pytest.raises(ValueError):
        RegressionNetworkClassifier().fit(np.zeros((6, 1)), [0, 1, 2, 0, 1, 2])
