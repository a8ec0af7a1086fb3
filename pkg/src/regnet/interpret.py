"""Shape/interaction grids and model archives.

Grids evaluate exactly one subset function over raw-unit feature values. No
background data is needed because a subset function only sees its own
features. Archives are single JSON documents; floats are written with
``repr`` so every binary64 value survives a round trip.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Preprocessor
from .model import (FeatureGroup, GroupKind, ModelSpec, RegressionNetwork, Task,
                    canonical_subset)
from .nn import MlpSpec, ParamSet, forward

ARCHIVE_FORMAT = "regnet-model"
ARCHIVE_VERSION = 1


class ArchiveError(ValueError):
    pass


@dataclass
class Axis:
    name: str
    kind: str
    values: list  # floats (raw units) or category labels

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "values": list(self.values)}


@dataclass
class FunctionGrid:
    subset: tuple
    axes: list
    values: np.ndarray
    combined: bool = False

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"grid values {self.values.shape} do not match axes {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid contains non-finite values")

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "axes": [a.to_dict() for a in self.axes],
            "combined": self.combined,
            "values": self.values.tolist(),
        }

    def rows(self):
        """Long-form rows: axis values followed by the contribution."""
        if len(self.axes) == 1:
            for v, out in zip(self.axes[0].values, self.values):
                yield [v, float(out)]
        else:
            a0, a1 = self.axes
            for i, v0 in enumerate(a0.values):
                for j, v1 in enumerate(a1.values):
                    yield [v0, v1, float(self.values[i, j])]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([a.name for a in self.axes] + ["value"])
            for row in self.rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")


def _group_index(model: RegressionNetwork, feature) -> int:
    if isinstance(feature, (int, np.integer)):
        if not 0 <= feature < len(model.schema):
            raise ValueError(f"feature index {feature} out of range")
        return int(feature)
    for i, g in enumerate(model.schema):
        if g.name == feature:
            return i
    raise ValueError(f"unknown feature {feature!r}")


def _axis(group: FeatureGroup, pre: Preprocessor, n_points: int):
    """Raw-unit axis and its encoded block."""
    if group.kind is GroupKind.CONTINUOUS:
        st = pre.continuous[group.name]
        raw = np.linspace(st["min"], st["max"], n_points)
        return Axis(group.name, "continuous", raw.tolist()), pre.encode_feature(group.name, raw)
    vocab = pre.categorical[group.name]["vocabulary"]
    return Axis(group.name, "categorical", list(vocab)), pre.encode_feature(group.name, vocab)


def grid_1d(model: RegressionNetwork, pre: Preprocessor, feature, n_points: int = 256) -> FunctionGrid:
    i = _group_index(model, feature)
    subset = (i,)
    if subset not in model.subnets:
        raise ValueError(f"model has no level-1 function for {model.schema[i].name!r}")
    axis, block = _axis(model.schema[i], pre, n_points)
    values = forward(model.subnets[subset], block)
    return FunctionGrid(subset, [axis], values)


def grid_2d(model: RegressionNetwork, pre: Preprocessor, pair, n_points: int = 64,
            combined: bool = False) -> FunctionGrid:
    """Interaction function over the product grid of two features.

    With ``combined`` the two level-1 grids are broadcast-added on top.
    Axes follow schema order regardless of the order in ``pair``.
    """
    if len(pair) != 2:
        raise ValueError("pair must name exactly two features")
    subset = canonical_subset(_group_index(model, f) for f in pair)
    if subset not in model.subnets:
        names = [model.schema[i].name for i in subset]
        raise ValueError(f"model has no level-2 function for {names}")
    (ax0, b0), (ax1, b1) = (_axis(model.schema[i], pre, n_points) for i in subset)
    n0, n1 = len(ax0), len(ax1)
    X = np.hstack([np.repeat(b0, n1, axis=0), np.tile(b1, (n0, 1))])
    values = forward(model.subnets[subset], X).reshape(n0, n1)
    if combined:
        missing = [model.schema[i].name for i in subset if (i,) not in model.subnets]
        if missing:
            raise ValueError(f"combined grid needs level-1 functions for {missing}")
        g0 = forward(model.subnets[(subset[0],)], b0)
        g1 = forward(model.subnets[(subset[1],)], b1)
        values = values + g0[:, None] + g1[None, :]
    return FunctionGrid(subset, [ax0, ax1], values, combined)


def additive_fit(values: np.ndarray):
    """Least-squares ``r_i + c_j`` approximation of a matrix and its residual.

    The residual is the part of a 2D grid no sum of one-feature functions
    can express.
    """
    v = np.asarray(values, dtype=np.float64)
    grand = v.mean()
    fit = v.mean(axis=1, keepdims=True) + v.mean(axis=0, keepdims=True) - grand
    return fit, v - fit


# -- archives ---------------------------------------------------------------

def _param_payload(p: ParamSet) -> dict:
    return {"spec": p.spec.to_dict(),
            "weights": [w.tolist() for w in p.weights],
            "biases": [b.tolist() for b in p.biases]}


def _param_from_payload(d: dict) -> ParamSet:
    spec = MlpSpec.from_dict(d["spec"])
    weights = [np.array(w, dtype=np.float64).reshape(o, i)
               for w, i, o in zip(d["weights"], spec.layer_sizes[:-1], spec.layer_sizes[1:])]
    biases = [np.array(b, dtype=np.float64).reshape(o) for b, o in zip(d["biases"], spec.layer_sizes[1:])]
    if len(weights) != len(spec.layer_sizes) - 1 or len(biases) != len(weights):
        raise ArchiveError("layer count does not match spec")
    return ParamSet(spec, weights, biases)


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(v) for v in obj]
    return obj


@dataclass
class ModelArchive:
    model: RegressionNetwork
    preprocessor: Preprocessor | None = None
    history: dict | None = None
    data: dict | None = None  # schema config and split settings used in training
    version: int = ARCHIVE_VERSION

    def to_dict(self) -> dict:
        m = self.model
        return {
            "format": ARCHIVE_FORMAT,
            "version": self.version,
            "task": m.task.value,
            "schema": [g.to_dict() for g in m.schema],
            "model_spec": m.spec.to_dict(),
            "subnets": [{"subset": list(k), **_param_payload(p)} for k, p in m.subnets.items()],
            "residual": None if m.residual is None else _param_payload(m.residual),
            "bias": None if m.bias is None else float(m.bias[0]),
            "preprocessor": None if self.preprocessor is None else self.preprocessor.to_dict(),
            "data": self.data,
            "history": _finite_or_none(self.history),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArchive":
        if not isinstance(d, dict) or d.get("format") != ARCHIVE_FORMAT:
            raise ArchiveError("not a model archive")
        if d.get("version") != ARCHIVE_VERSION:
            raise ArchiveError(f"unsupported archive version {d.get('version')!r}, expected {ARCHIVE_VERSION}")
        try:
            schema = [FeatureGroup.from_dict(g) for g in d["schema"]]
            subnets = {canonical_subset(s["subset"]): _param_from_payload(s) for s in d["subnets"]}
            residual = None if d["residual"] is None else _param_from_payload(d["residual"])
            bias = None if d["bias"] is None else np.array([float(d["bias"])])
            model = RegressionNetwork(ModelSpec.from_dict(d["model_spec"]), schema, Task(d["task"]),
                                      subnets, residual, bias)
            pre = None if d["preprocessor"] is None else Preprocessor.from_dict(d["preprocessor"])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ArchiveError):
                raise
            raise ArchiveError(f"corrupt archive payload: {e}") from None
        for key, p in subnets.items():
            width = len(model.columns(key))
            if p.spec.input_dim != width:
                raise ArchiveError(f"subnet {key} expects {p.spec.input_dim} inputs, schema gives {width}")
        if residual is not None and residual.spec.input_dim != model.n_columns:
            raise ArchiveError("residual input width does not match schema")
        return cls(model, pre, d.get("history"), d.get("data"), d["version"])


def save_model(model: RegressionNetwork, path, preprocessor=None, history=None, data=None) -> ModelArchive:
    if history is not None and hasattr(history, "summary"):
        history = history.summary()
    archive = ModelArchive(model, preprocessor, history, data)
    text = archive.dumps()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return archive


def load_archive(path) -> ModelArchive:
    try:
        text = Path(path).read_text(encoding="utf-8")
        d = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ArchiveError(f"corrupt archive payload: {e}") from None
    return ModelArchive.from_dict(d)


def load_model(path) -> RegressionNetwork:
    return load_archive(path).model

