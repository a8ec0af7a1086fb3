"""scikit-learn compatible wrappers around the additive network trainer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import CATEGORICAL, CONTINUOUS, RawDataset, SchemaConfig, apply_preprocessor, fit_preprocessor, split
from .interpret import grid_1d, grid_2d
from .model import Activation, ModelSpec, Task, build_model, decompose, predict
from .nn import MlpSpec, sigmoid
from .training import TrainConfig, train


class _BaseRegressionNetwork(BaseEstimator):
    _task = Task.REGRESSION

    def __init__(self, k_max=2, residual=False, hidden=(32, 32), residual_hidden=(64, 64),
                 activation="elu", include_bias=False, mode="stepwise", max_epochs=512,
                 patience=32, min_delta=0.005, batch_size=256, learning_rate=1e-3,
                 validation_fraction=0.2, categorical_features=None, onehot_max_cardinality=16,
                 random_state=42):
        self.k_max = k_max
        self.residual = residual
        self.hidden = hidden
        self.residual_hidden = residual_hidden
        self.activation = activation
        self.include_bias = include_bias
        self.mode = mode
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.validation_fraction = validation_fraction
        self.categorical_features = categorical_features
        self.onehot_max_cardinality = onehot_max_cardinality
        self.random_state = random_state

    # -- input handling ----------------------------------------------------

    def _columns(self, X):
        names = getattr(X, "columns", None)
        X = check_array(X, dtype=None, ensure_all_finite=False)
        if names is None:
            names = [f"x{i}" for i in range(X.shape[1])]
        return X, [str(n) for n in names]

    def _categorical_mask(self, names):
        cats = self.categorical_features or ()
        mask = []
        for i, n in enumerate(names):
            mask.append(i in cats or n in cats)
        return mask

    def _raw(self, X, y=None):
        X, names = self._columns(X)
        if hasattr(self, "feature_names_in_"):
            if X.shape[1] != self.n_features_in_:
                raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
            names = list(self.feature_names_in_)
        mask = self._categorical_mask(names) if not hasattr(self, "_cat_mask") else self._cat_mask
        columns, kinds = {}, {}
        for j, n in enumerate(names):
            if mask[j]:
                columns[n] = np.array([str(v) for v in X[:, j]], dtype=object)
                kinds[n] = CATEGORICAL
            else:
                columns[n] = X[:, j].astype(np.float64)
                if not np.all(np.isfinite(columns[n])):
                    raise ValueError(f"column {n!r} has non-finite values")
                kinds[n] = CONTINUOUS
        target = "__target__"
        columns[target] = np.zeros(X.shape[0]) if y is None else np.asarray(y)
        kinds[target] = "target"
        return RawDataset(columns, kinds, target, self._task), names, mask

    def _model_spec(self, n_groups):
        act = Activation(self.activation)
        level = MlpSpec((1, *self.hidden, 1), act)
        return ModelSpec(
            k_max=min(self.k_max, n_groups),
            include_bias=self.include_bias,
            include_residual=self.residual,
            subnet_spec_per_level={1: level},
            residual_spec=MlpSpec((1, *self.residual_hidden, 1), act),
        )

    def _train_config(self):
        return TrainConfig(max_epochs=self.max_epochs, patience=self.patience, min_delta=self.min_delta,
                           batch_size=self.batch_size, lr=self.learning_rate, mode=self.mode,
                           class_balancing=getattr(self, "class_balancing", False),
                           seed=self.random_state if self.random_state is not None else 0)

    def _fit(self, X, y, target_scaling):
        for attr in ("feature_names_in_", "_cat_mask"):
            if hasattr(self, attr):
                delattr(self, attr)
        raw, names, mask = self._raw(X, y)
        schema = SchemaConfig(target=raw.target, columns=dict(raw.kinds), task=self._task,
                              onehot_max_cardinality=self.onehot_max_cardinality,
                              target_scaling=target_scaling)
        seed = self.random_state if self.random_state is not None else 0
        train_raw, val_raw = split(raw, self.validation_fraction, seed)
        pre = fit_preprocessor(train_raw, schema)
        train_ds, val_ds = apply_preprocessor(pre, train_raw), apply_preprocessor(pre, val_raw)
        model = build_model(train_ds.schema, self._model_spec(len(train_ds.schema)), self._task, seed)
        model, history = train(model, train_ds.as_pair(), val_ds.as_pair(), self._train_config())
        self.model_ = model
        self.preprocessor_ = pre
        self.history_ = history
        self.n_features_in_ = len(names)
        self.feature_names_in_ = np.array(names, dtype=object)
        self._cat_mask = mask
        return self

    def _encode(self, X):
        check_is_fitted(self, "model_")
        raw, _, _ = self._raw(X)
        pre = self.preprocessor_
        blocks = [pre.encode_feature(n, raw.columns[n]) for n in pre.features]
        return np.hstack(blocks)

    def _raw_output(self, X):
        X = self._encode(X)  # checks fitted state first
        return predict(self.model_, X)

    def decompose(self, X) -> dict:
        """Per-subset contributions in model output units, keyed by feature-name tuples."""
        check_is_fitted(self, "model_")
        parts = decompose(self.model_, self._encode(X))
        names = [g.name for g in self.model_.schema]
        return {(tuple(names[i] for i in k) if isinstance(k, tuple) else k): v for k, v in parts.items()}

    def shape_function(self, feature, n_points=256):
        check_is_fitted(self, "model_")
        return grid_1d(self.model_, self.preprocessor_, feature, n_points)

    def interaction_function(self, pair, n_points=64, combined=False):
        check_is_fitted(self, "model_")
        return grid_2d(self.model_, self.preprocessor_, pair, n_points, combined)


class RegressionNetworkRegressor(RegressorMixin, _BaseRegressionNetwork):
    """Additive network regressor.

    Targets are standardized for training; :meth:`predict` returns values in
    the original target units.
    """

    _task = Task.REGRESSION

    def __init__(self, k_max=2, residual=False, hidden=(32, 32), residual_hidden=(64, 64),
                 activation="elu", include_bias=False, mode="stepwise", max_epochs=512,
                 patience=32, min_delta=0.005, batch_size=256, learning_rate=1e-3,
                 validation_fraction=0.2, categorical_features=None, onehot_max_cardinality=16,
                 standardize_target=True, random_state=42):
        super().__init__(k_max, residual, hidden, residual_hidden, activation, include_bias, mode,
                         max_epochs, patience, min_delta, batch_size, learning_rate,
                         validation_fraction, categorical_features, onehot_max_cardinality,
                         random_state)
        self.standardize_target = standardize_target

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64).ravel()
        return self._fit(X, y, "standardize" if self.standardize_target else "none")

    def predict(self, X):
        out = self._raw_output(X)
        return self.preprocessor_.inverse_target(out)


class RegressionNetworkClassifier(ClassifierMixin, _BaseRegressionNetwork):
    """Binary additive network classifier; contributions are in logit units."""

    _task = Task.BINARY

    def __init__(self, k_max=2, residual=False, hidden=(32, 32), residual_hidden=(64, 64),
                 activation="elu", include_bias=False, mode="stepwise", max_epochs=512,
                 patience=32, min_delta=0.005, batch_size=256, learning_rate=1e-3,
                 validation_fraction=0.2, categorical_features=None, onehot_max_cardinality=16,
                 class_balancing=True, random_state=42):
        super().__init__(k_max, residual, hidden, residual_hidden, activation, include_bias, mode,
                         max_epochs, patience, min_delta, batch_size, learning_rate,
                         validation_fraction, categorical_features, onehot_max_cardinality,
                         random_state)
        self.class_balancing = class_balancing

    def fit(self, X, y):
        y = np.asarray(y).ravel()
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"binary classifier needs exactly 2 classes, got {classes.size}")
        self.classes_ = classes
        return self._fit(X, (y == classes[1]).astype(int).astype(str), "none")

    def decision_function(self, X):
        return self._raw_output(X)

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        positive = self.decision_function(X) > 0
        return self.classes_[positive.astype(int)]
