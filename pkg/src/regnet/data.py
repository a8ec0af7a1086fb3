"""Tabular ingestion: typed CSV loading, holdout split and encoding.

Continuous columns are standardized with training-split statistics
(population sd). Categorical columns become one-hot blocks or a single
ordinal column; cardinalities above ``onehot_max_cardinality`` fall back to
ordinal unless overridden per column.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import FeatureGroup, GroupKind, Task

log = logging.getLogger(__name__)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
TARGET = "target"
IGNORED = "ignored"
SD_FLOOR = 1e-8


class SchemaError(ValueError):
    pass


@dataclass
class SchemaConfig:
    """Column typing for one CSV file.

    JSON layout::

        {"target": "z", "task": "regression",
         "columns": {"x": "continuous", "a": "categorical", "id": "ignored"},
         "encoding": {"a": "onehot"},
         "onehot_max_cardinality": 16,
         "target_scaling": "standardize"}
    """

    target: str
    columns: dict
    task: Task = Task.REGRESSION
    encoding: dict = field(default_factory=dict)
    onehot_max_cardinality: int = 16
    target_scaling: str | None = None

    def __post_init__(self):
        self.task = Task(self.task)
        cols = dict(self.columns)
        cols.setdefault(self.target, TARGET)
        for name, kind in cols.items():
            if kind not in (CONTINUOUS, CATEGORICAL, TARGET, IGNORED):
                raise SchemaError(f"column {name!r}: unknown kind {kind!r}")
            if kind == TARGET and name != self.target:
                raise SchemaError(f"column {name!r} is marked target but target is {self.target!r}")
        self.columns = cols
        for name, mode in self.encoding.items():
            if mode not in ("onehot", "ordinal"):
                raise SchemaError(f"column {name!r}: encoding must be onehot or ordinal")
        if self.target_scaling is None:
            self.target_scaling = "standardize" if self.task is Task.REGRESSION else "none"
        if self.target_scaling not in ("standardize", "none"):
            raise SchemaError("target_scaling must be 'standardize' or 'none'")

    @property
    def features(self) -> list:
        return [c for c, k in self.columns.items() if k in (CONTINUOUS, CATEGORICAL)]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "task": self.task.value,
            "columns": dict(self.columns),
            "encoding": dict(self.encoding),
            "onehot_max_cardinality": self.onehot_max_cardinality,
            "target_scaling": self.target_scaling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        if "schema" in d and "target" not in d:
            d = d["schema"]  # generator sidecars nest the schema
        try:
            return cls(
                target=d["target"],
                columns=d["columns"],
                task=d.get("task", "regression"),
                encoding=d.get("encoding", {}),
                onehot_max_cardinality=int(d.get("onehot_max_cardinality", 16)),
                target_scaling=d.get("target_scaling"),
            )
        except KeyError as e:
            raise SchemaError(f"schema config missing key {e}") from None

    @classmethod
    def load(cls, path) -> "SchemaConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RawDataset:
    """Typed but unencoded columns. Categorical values are strings."""

    columns: dict
    kinds: dict
    target: str
    task: Task = Task.REGRESSION
    dropped: int = 0

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.target])

    @property
    def features(self) -> list:
        return [c for c in self.columns if c != self.target]

    def take(self, idx) -> "RawDataset":
        return RawDataset({k: v[idx] for k, v in self.columns.items()}, dict(self.kinds),
                          self.target, self.task)


def load_csv(path, schema: SchemaConfig) -> RawDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        if schema.target not in header:
            raise SchemaError(f"target column {schema.target!r} not in {path}")
        undeclared = [h for h in header if h not in schema.columns]
        if undeclared:
            raise SchemaError(f"columns not declared in schema: {undeclared}")
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise SchemaError(f"schema columns missing from {path}: {missing}")
        keep = [(i, h) for i, h in enumerate(header) if schema.columns[h] != IGNORED]
        values = {h: [] for _, h in keep}
        dropped = 0
        for row in reader:
            if not row:
                continue
            parsed = _parse_row(row, keep, schema, len(header))
            if parsed is None:
                dropped += 1
                continue
            for h, v in parsed.items():
                values[h].append(v)
    if dropped:
        log.info("dropped %d rows with missing or unparseable cells from %s", dropped, path)
    if not values[schema.target]:
        raise SchemaError(f"no usable rows in {path}")
    columns, kinds = {}, {}
    for h in schema.features:
        kind = schema.columns[h]
        kinds[h] = kind
        columns[h] = np.array(values[h], dtype=np.float64 if kind == CONTINUOUS else object)
    columns[schema.target] = np.array(values[schema.target], dtype=object
                                      if schema.task is Task.BINARY else np.float64)
    kinds[schema.target] = TARGET
    return RawDataset(columns, kinds, schema.target, schema.task, dropped)


def _parse_row(row, keep, schema, width):
    if len(row) != width:
        return None
    out = {}
    for i, h in keep:
        cell = row[i].strip()
        if cell == "":
            return None
        kind = schema.columns[h]
        numeric = kind == CONTINUOUS or (kind == TARGET and schema.task is Task.REGRESSION)
        if numeric:
            try:
                val = float(cell)
            except ValueError:
                return None
            if not np.isfinite(val):
                return None
            out[h] = val
        else:
            out[h] = cell
    return out


def write_csv(raw: RawDataset, path):
    """Write with ``repr`` floats so values round-trip exactly."""
    names = list(raw.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        cols = [raw.columns[n] for n in names]
        for i in range(raw.n_rows):
            w.writerow([repr(float(c[i])) if c.dtype.kind == "f" else str(c[i]) for c in cols])


def split(raw: RawDataset, val_fraction: float = 0.2, seed: int = 0):
    """Seeded permutation; the first ``round(n * val_fraction)`` rows go to validation."""
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    n = raw.n_rows
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    n_val = min(max(int(round(n * val_fraction)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return raw.take(np.sort(perm[n_val:])), raw.take(np.sort(perm[:n_val]))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: list
    task: Task

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def as_pair(self):
        return self.X, self.y


def _sort_key(v):
    return str(v)


@dataclass
class Preprocessor:
    features: list
    continuous: dict  # name -> {"mean", "sd", "min", "max"}
    categorical: dict  # name -> {"vocabulary": [...], "encoding": "onehot"|"ordinal"}
    task: Task
    target_scaling: str
    target_mean: float = 0.0
    target_sd: float = 1.0
    target_classes: list | None = None

    def schema(self) -> list:
        groups, start = [], 0
        for name in self.features:
            if name in self.continuous:
                g = FeatureGroup(name, GroupKind.CONTINUOUS, start)
            else:
                info = self.categorical[name]
                kind = GroupKind.ONEHOT if info["encoding"] == "onehot" else GroupKind.ORDINAL
                g = FeatureGroup(name, kind, start, len(info["vocabulary"]))
            groups.append(g)
            start += g.width
        return groups

    def encode_feature(self, name, values) -> np.ndarray:
        """Encoded block (n x width) for one raw feature column."""
        if name in self.continuous:
            st = self.continuous[name]
            vals = np.asarray(values, dtype=np.float64)
            return ((vals - st["mean"]) / st["sd"])[:, None]
        info = self.categorical[name]
        vocab = info["vocabulary"]
        lookup = {v: i for i, v in enumerate(vocab)}
        try:
            codes = np.array([lookup[str(v)] for v in values], dtype=np.intp)
        except KeyError as e:
            raise ValueError(f"unseen category {e.args[0]!r} in column {name!r}") from None
        if info["encoding"] == "ordinal":
            return codes.astype(np.float64)[:, None]
        block = np.zeros((codes.size, len(vocab)))
        block[np.arange(codes.size), codes] = 1.0
        return block

    def decode_continuous(self, name, encoded) -> np.ndarray:
        st = self.continuous[name]
        return np.asarray(encoded) * st["sd"] + st["mean"]

    def transform_target(self, values) -> np.ndarray:
        if self.task is Task.BINARY:
            lookup = {c: float(i) for i, c in enumerate(self.target_classes)}
            try:
                return np.array([lookup[str(v)] for v in values], dtype=np.float64)
            except KeyError as e:
                raise ValueError(f"unseen target label {e.args[0]!r}") from None
        vals = np.asarray(values, dtype=np.float64)
        if self.target_scaling == "standardize":
            return (vals - self.target_mean) / self.target_sd
        return vals

    def inverse_target(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=np.float64)
        if self.task is Task.REGRESSION and self.target_scaling == "standardize":
            return vals * self.target_sd + self.target_mean
        return vals

    def mse_scale(self) -> float:
        """Factor converting an MSE in training units to raw target units."""
        if self.task is Task.REGRESSION and self.target_scaling == "standardize":
            return self.target_sd ** 2
        return 1.0

    def transform(self, raw: RawDataset) -> Dataset:
        return apply_preprocessor(self, raw)

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "continuous": {k: dict(v) for k, v in self.continuous.items()},
            "categorical": {k: {"vocabulary": list(v["vocabulary"]), "encoding": v["encoding"]}
                            for k, v in self.categorical.items()},
            "task": self.task.value,
            "target_scaling": self.target_scaling,
            "target_mean": self.target_mean,
            "target_sd": self.target_sd,
            "target_classes": self.target_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(
            features=list(d["features"]),
            continuous={k: dict(v) for k, v in d["continuous"].items()},
            categorical={k: dict(v) for k, v in d["categorical"].items()},
            task=Task(d["task"]),
            target_scaling=d["target_scaling"],
            target_mean=d["target_mean"],
            target_sd=d["target_sd"],
            target_classes=d["target_classes"],
        )


def _moments(vals):
    if vals.size and np.all(vals == vals[0]):
        return float(vals[0]), SD_FLOOR
    return float(np.mean(vals)), max(float(np.std(vals)), SD_FLOOR)


def fit_preprocessor(train: RawDataset, schema: SchemaConfig | None = None) -> Preprocessor:
    """Learn encodings and scaling from the training split only."""
    if train.n_rows == 0:
        raise ValueError("cannot fit on an empty dataset")
    max_card = 16 if schema is None else schema.onehot_max_cardinality
    overrides = {} if schema is None else schema.encoding
    scaling = schema.target_scaling if schema is not None else (
        "standardize" if train.task is Task.REGRESSION else "none")
    continuous, categorical = {}, {}
    for name in train.features:
        vals = train.columns[name]
        if train.kinds[name] == CONTINUOUS:
            vals = vals.astype(np.float64)
            mean, sd = _moments(vals)
            continuous[name] = {"mean": mean, "sd": sd,
                                "min": float(vals.min()), "max": float(vals.max())}
        else:
            vocab = sorted({str(v) for v in vals}, key=_sort_key)
            mode = overrides.get(name, "onehot" if len(vocab) <= max_card else "ordinal")
            categorical[name] = {"vocabulary": vocab, "encoding": mode}
    pre = Preprocessor(train.features, continuous, categorical, Task(train.task), scaling)
    y = train.columns[train.target]
    if pre.task is Task.BINARY:
        labels = sorted({str(v) for v in y})
        if len(labels) != 2:
            raise ValueError(f"binary target needs exactly 2 labels, found {labels}")
        # numeric 0/1 labels keep their meaning
        if set(labels) <= {"0", "1", "0.0", "1.0"}:
            labels = sorted(labels, key=float)
        pre.target_classes = labels
    elif scaling == "standardize":
        pre.target_mean, pre.target_sd = _moments(y.astype(np.float64))
    return pre


def apply_preprocessor(pre: Preprocessor, raw: RawDataset) -> Dataset:
    if list(raw.features) != list(pre.features):
        raise ValueError(f"columns {raw.features} do not match fitted columns {pre.features}")
    blocks = [pre.encode_feature(name, raw.columns[name]) for name in pre.features]
    X = np.hstack(blocks) if blocks else np.zeros((raw.n_rows, 0))
    y = pre.transform_target(raw.columns[raw.target])
    return Dataset(X, y, pre.schema(), pre.task)


def prepare(raw: RawDataset, schema: SchemaConfig | None = None, val_fraction=0.2, split_seed=0):
    """Split, fit on train, encode both halves."""
    train, val = split(raw, val_fraction, split_seed)
    pre = fit_preprocessor(train, schema)
    return apply_preprocessor(pre, train), apply_preprocessor(pre, val), pre
