"""Additive neural networks over feature subsets, trained level by level."""

from .data import (Dataset, Preprocessor, RawDataset, SchemaConfig, apply_preprocessor,
                   fit_preprocessor, load_csv, prepare, split)
from .estimators import RegressionNetworkClassifier, RegressionNetworkRegressor
from .interpret import FunctionGrid, ModelArchive, grid_1d, grid_2d, load_archive, load_model, save_model
from .model import (ARCHITECTURES, FeatureGroup, GroupKind, ModelSpec, RegressionNetwork, Task,
                    architecture_spec, build_model, decompose, enumerate_subsets, predict)
from .nn import Activation, AdamState, LossKind, MlpSpec, ParamSet, init_mlp
from .training import (EarlyStopping, TrainConfig, TrainHistory, TrainMode, class_weights, train,
                       train_all_at_once, train_baseline_regression, train_level, train_stepwise)

__version__ = "0.1.0"
