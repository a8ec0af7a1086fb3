"""Additive networks over feature subsets.

A model is a sum of small MLPs, one per feature subset (level = subset size),
plus an optional residual MLP over every encoded column and an optional
scalar bias. Subsets are tuples of feature-group indices in increasing order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from math import comb

import numpy as np

from .nn import Activation, MlpSpec, ParamSet, forward, init_mlp

RESIDUAL = "residual"
BIAS = "bias"


class Task(str, Enum):
    REGRESSION = "regression"
    BINARY = "binary"


class GroupKind(str, Enum):
    CONTINUOUS = "continuous"
    ONEHOT = "onehot"
    ORDINAL = "ordinal"


@dataclass(frozen=True)
class FeatureGroup:
    """One raw feature and the encoded columns it occupies."""

    name: str
    kind: GroupKind
    start: int
    cardinality: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))
        if self.kind is not GroupKind.CONTINUOUS and not self.cardinality:
            raise ValueError(f"categorical group {self.name!r} needs a cardinality")

    @property
    def width(self) -> int:
        return self.cardinality if self.kind is GroupKind.ONEHOT else 1

    @property
    def columns(self) -> range:
        return range(self.start, self.start + self.width)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "start": self.start,
                "cardinality": self.cardinality}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureGroup":
        return cls(d["name"], GroupKind(d["kind"]), int(d["start"]), d.get("cardinality"))


def schema_width(schema) -> int:
    return sum(g.width for g in schema)


def check_schema(schema):
    pos = 0
    for g in schema:
        if g.start != pos:
            raise ValueError(f"group {g.name!r} starts at {g.start}, expected {pos}")
        pos += g.width
    if not schema:
        raise ValueError("schema is empty")


def canonical_subset(indices) -> tuple:
    s = tuple(sorted(int(i) for i in indices))
    if not s:
        raise ValueError("empty feature subset")
    if len(set(s)) != len(s):
        raise ValueError(f"repeated index in subset {s}")
    return s


def enumerate_subsets(n_groups: int, k_max: int) -> list:
    """All subsets of sizes 1..k_max, by level then lexicographically."""
    if not 1 <= k_max <= n_groups:
        raise ValueError(f"k_max={k_max} outside [1, {n_groups}]")
    out = []
    for k in range(1, k_max + 1):
        out.extend(combinations(range(n_groups), k))
    assert len(out) == sum(comb(n_groups, k) for k in range(1, k_max + 1))
    return out


def default_level_spec(level) -> MlpSpec:
    """Hidden layout for a subnet at ``level`` (input width is a placeholder)."""
    if level == RESIDUAL:
        return MlpSpec((1, 64, 64, 1), Activation.ELU)
    return MlpSpec((1, 32, 32, 1), Activation.ELU)


@dataclass
class ModelSpec:
    k_max: int = 2
    include_bias: bool = False
    include_residual: bool = False
    subnet_spec_per_level: dict = field(default_factory=dict)
    residual_spec: MlpSpec | None = None
    explicit_subsets: list | None = None
    # every unit starts as the zero function, so a phase that cannot beat
    # the tolerance leaves its units contributing nothing
    zero_output_init: bool = True

    def level_template(self, level: int) -> MlpSpec:
        if level in self.subnet_spec_per_level:
            return self.subnet_spec_per_level[level]
        lower = [k for k in self.subnet_spec_per_level if k < level]
        if lower:
            return self.subnet_spec_per_level[max(lower)]
        return default_level_spec(level)

    def residual_template(self) -> MlpSpec:
        return self.residual_spec or default_level_spec(RESIDUAL)

    def subsets(self, n_groups: int) -> list:
        if self.explicit_subsets is not None:
            seen = []
            for s in self.explicit_subsets:
                s = canonical_subset(s)
                if s[-1] >= n_groups or s[0] < 0:
                    raise ValueError(f"subset {s} out of bounds for {n_groups} groups")
                if s not in seen:
                    seen.append(s)
            return sorted(seen, key=lambda s: (len(s), s))
        if self.k_max > n_groups:
            raise ValueError(f"k_max={self.k_max} exceeds the {n_groups} feature groups")
        return enumerate_subsets(n_groups, self.k_max)

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "include_bias": self.include_bias,
            "include_residual": self.include_residual,
            "subnet_spec_per_level": {str(k): v.to_dict() for k, v in sorted(self.subnet_spec_per_level.items())},
            "residual_spec": None if self.residual_spec is None else self.residual_spec.to_dict(),
            "explicit_subsets": None if self.explicit_subsets is None else [list(s) for s in self.explicit_subsets],
            "zero_output_init": self.zero_output_init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            k_max=int(d["k_max"]),
            include_bias=bool(d["include_bias"]),
            include_residual=bool(d["include_residual"]),
            subnet_spec_per_level={int(k): MlpSpec.from_dict(v) for k, v in d["subnet_spec_per_level"].items()},
            residual_spec=None if d["residual_spec"] is None else MlpSpec.from_dict(d["residual_spec"]),
            explicit_subsets=None if d["explicit_subsets"] is None else [tuple(s) for s in d["explicit_subsets"]],
            zero_output_init=bool(d.get("zero_output_init", True)),
        )


ARCHITECTURES = ("regression", "k1", "k1+2", "k1+2+res", "dense")


def architecture_spec(name: str, **overrides) -> ModelSpec:
    """ModelSpec for one of the five benchmark architectures."""
    name = name.lower()
    if name == "regression":
        spec = ModelSpec(k_max=1, subnet_spec_per_level={1: MlpSpec((1, 1))})
    elif name == "k1":
        spec = ModelSpec(k_max=1)
    elif name == "k1+2":
        spec = ModelSpec(k_max=2)
    elif name == "k1+2+res":
        spec = ModelSpec(k_max=2, include_residual=True)
    elif name == "dense":
        spec = ModelSpec(k_max=1, include_residual=True, explicit_subsets=[])
    else:
        raise ValueError(f"unknown architecture {name!r}; expected one of {ARCHITECTURES}")
    for k, v in overrides.items():
        setattr(spec, k, v)
    return spec


def unit_seed(seed: int, key) -> int:
    """Stable per-unit seed so adding subsets never reshuffles the others."""
    tag = key if isinstance(key, str) else ",".join(map(str, key))
    digest = hashlib.sha256(f"{int(seed)}|{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RegressionNetwork:
    spec: ModelSpec
    schema: list
    task: Task
    subnets: dict
    residual: ParamSet | None = None
    bias: np.ndarray | None = None
    _cols: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_columns(self) -> int:
        return schema_width(self.schema)

    def columns(self, key) -> np.ndarray:
        """Encoded column indices feeding unit ``key``."""
        if key not in self._cols:
            if key == RESIDUAL:
                cols = np.arange(self.n_columns)
            else:
                cols = np.array([c for i in key for c in self.schema[i].columns], dtype=np.intp)
            self._cols[key] = cols
        return self._cols[key]

    def unit_keys(self) -> list:
        """Units in summation order: subsets, residual, bias."""
        keys = list(self.subnets)
        if self.residual is not None:
            keys.append(RESIDUAL)
        if self.bias is not None:
            keys.append(BIAS)
        return keys

    def levels(self) -> list:
        return sorted({len(s) for s in self.subnets})

    def get_unit(self, key):
        if key == RESIDUAL:
            return self.residual
        if key == BIAS:
            return self.bias
        return self.subnets[key]

    def set_unit(self, key, value):
        if key == RESIDUAL:
            self.residual = value
        elif key == BIAS:
            self.bias = value
        else:
            self.subnets[key] = value

    def unit_output(self, key, X) -> np.ndarray:
        if key == BIAS:
            return np.full(X.shape[0], self.bias[0])
        return forward(self.get_unit(key), X[:, self.columns(key)])

    def copy(self) -> "RegressionNetwork":
        return RegressionNetwork(
            self.spec, list(self.schema), self.task,
            {k: p.copy() for k, p in self.subnets.items()},
            None if self.residual is None else self.residual.copy(),
            None if self.bias is None else self.bias.copy(),
        )

    def param_bytes(self) -> dict:
        out = {}
        for key in self.unit_keys():
            unit = self.get_unit(key)
            out[key] = unit.tobytes() if key == BIAS else unit.to_bytes()
        return out


def build_model(schema, spec: ModelSpec, task=Task.REGRESSION, seed: int = 0) -> RegressionNetwork:
    schema = list(schema)
    check_schema(schema)
    subnets = {}
    for subset in spec.subsets(len(schema)):
        width = sum(schema[i].width for i in subset)
        mlp = spec.level_template(len(subset)).with_input(width)
        subnets[subset] = init_mlp(mlp, unit_seed(seed, subset), spec.zero_output_init)
    residual = None
    if spec.include_residual:
        mlp = spec.residual_template().with_input(schema_width(schema))
        residual = init_mlp(mlp, unit_seed(seed, RESIDUAL), spec.zero_output_init)
    bias = np.zeros(1) if spec.include_bias else None
    if not subnets and residual is None and bias is None:
        raise ValueError("model has no units")
    return RegressionNetwork(spec, schema, Task(task), subnets, residual, bias)


def _check_input(model: RegressionNetwork, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_columns:
        raise ValueError(f"expected a matrix with {model.n_columns} columns, got shape {X.shape}")
    return X


def decompose(model: RegressionNetwork, X) -> dict:
    """Per-unit contributions, keyed by subset tuple, ``"residual"`` and ``"bias"``."""
    X = _check_input(model, X)
    return {key: model.unit_output(key, X) for key in model.unit_keys()}


def predict(model: RegressionNetwork, X, keys=None) -> np.ndarray:
    """Sum of unit outputs (logits for binary tasks).

    Summation runs left to right over ``model.unit_keys()`` (or ``keys``),
    so it matches a left fold of :func:`decompose` exactly.
    """
    X = _check_input(model, X)
    total = None
    for key in model.unit_keys() if keys is None else keys:
        out = model.unit_output(key, X)
        total = out if total is None else total + out
    return total
