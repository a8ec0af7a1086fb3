"""Architecture comparison over datasets with repeated seeds.

For every (dataset, architecture) cell the harness trains ``runs_per_cell``
models with seeds ``base_seed + i`` on a fixed split and records each run's
minimum validation loss. Reports are plain JSON with no timestamps, so the
same config always produces the same bytes.
"""

from __future__ import annotations

import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .data import SchemaConfig, load_csv, prepare
from .model import ARCHITECTURES, Task, architecture_spec, build_model
from .synthetic import canonical_name, generate, schema_for
from .training import TrainConfig, train, train_baseline_regression

log = logging.getLogger(__name__)

MIN_RUNS = 3


@dataclass
class DatasetEntry:
    """A synthetic dataset name or a CSV path with its schema config."""

    synthetic: str | None = None
    csv: str | None = None
    schema: str | None = None
    rows: int = 10000
    seed: int = 0
    name: str | None = None
    target_scaling: str | None = None

    def __post_init__(self):
        if (self.synthetic is None) == (self.csv is None):
            raise ValueError("dataset entry needs exactly one of 'synthetic' or 'csv'")
        if self.csv is not None and self.schema is None:
            raise ValueError(f"CSV dataset {self.csv!r} needs a 'schema' path")
        if self.synthetic is not None:
            self.synthetic = canonical_name(self.synthetic)
        if self.name is None:
            self.name = self.synthetic or Path(self.csv).stem

    def load(self):
        if self.synthetic is not None:
            raw = generate(self.synthetic, self.rows, self.seed)
            schema = schema_for(self.synthetic)
        else:
            schema = SchemaConfig.load(self.schema)
            raw = load_csv(self.csv, schema)
        if self.target_scaling is not None:
            schema.target_scaling = self.target_scaling
        return raw, schema

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class SuiteConfig:
    datasets: list
    architectures: list = field(default_factory=lambda: list(ARCHITECTURES))
    runs_per_cell: int = 5
    base_seed: int = 0
    split_seed: int = 0
    val_fraction: float = 0.2
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        self.datasets = [d if isinstance(d, DatasetEntry) else DatasetEntry(**d) for d in self.datasets]
        self.architectures = [a.lower() for a in self.architectures]
        for a in self.architectures:
            if a not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {a!r}")
        if self.runs_per_cell < MIN_RUNS:
            raise ValueError(f"runs_per_cell must be at least {MIN_RUNS}")
        TrainConfig(**self.train)  # validate overrides early

    def to_dict(self) -> dict:
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "architectures": list(self.architectures),
            "runs_per_cell": self.runs_per_cell,
            "base_seed": self.base_seed,
            "split_seed": self.split_seed,
            "val_fraction": self.val_fraction,
            "train": dict(self.train),
        }

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class ResultCell:
    dataset: str
    architecture: str
    metric: str
    units: str
    values: list = field(default_factory=list)
    raw_values: list = field(default_factory=list)
    error: str | None = None
    models: list = field(default_factory=list, repr=False)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.values) if self.values else float("nan")

    @property
    def std(self) -> float:
        """Sample (n - 1) standard deviation."""
        return statistics.stdev(self.values) if len(self.values) > 1 else 0.0

    @property
    def raw_mean(self) -> float:
        return statistics.fmean(self.raw_values) if self.raw_values else float("nan")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "architecture": self.architecture,
            "metric": self.metric,
            "units": self.units,
            "values": list(self.values),
            "mean": self.mean if self.values else None,
            "std": self.std if self.values else None,
            "raw_values": list(self.raw_values),
            "raw_mean": self.raw_mean if self.raw_values else None,
            "error": self.error,
        }


def fit_architecture(arch, train_ds, val_ds, config: TrainConfig):
    """Train one architecture; returns ``(model, history)``."""
    if arch == "regression":
        return train_baseline_regression(train_ds.schema, train_ds.as_pair(), val_ds.as_pair(),
                                         train_ds.task, config)
    model = build_model(train_ds.schema, architecture_spec(arch), train_ds.task, config.seed)
    return train(model, train_ds.as_pair(), val_ds.as_pair(), config)


def _run_one(args):
    arch, train_ds, val_ds, config = args
    return fit_architecture(arch, train_ds, val_ds, config)


def run_suite(config: SuiteConfig, jobs: int = 1, keep_models: bool = False) -> list:
    cells = []
    for entry in config.datasets:
        try:
            raw, schema = entry.load()
            train_ds, val_ds, pre = prepare(raw, schema, config.val_fraction, config.split_seed)
        except Exception as e:  # noqa: BLE001 - recorded per cell
            log.error("dataset %s failed to load: %s", entry.name, e)
            for arch in config.architectures:
                cells.append(ResultCell(entry.name, arch, "?", "?", error=f"load: {e}"))
            continue
        metric = "bce" if pre.task is Task.BINARY else "mse"
        units = "standardized" if (pre.task is Task.REGRESSION and pre.target_scaling == "standardize") else "raw"
        scale = pre.mse_scale() if metric == "mse" else 1.0
        for arch in config.architectures:
            cell = ResultCell(entry.name, arch, metric, units)
            tasks = [(arch, train_ds, val_ds, TrainConfig(**{**config.train, "seed": config.base_seed + i}))
                     for i in range(config.runs_per_cell)]
            try:
                if jobs > 1:
                    with ProcessPoolExecutor(max_workers=jobs) as pool:
                        results = list(pool.map(_run_one, tasks))
                else:
                    results = [_run_one(t) for t in tasks]
            except Exception as e:  # noqa: BLE001 - recorded per cell
                log.error("cell %s/%s failed: %s", entry.name, arch, e)
                cell.error = f"train: {e}"
                cells.append(cell)
                continue
            for model, history in results:
                cell.values.append(history.final_val_loss)
                cell.raw_values.append(history.final_val_loss * scale)
                if keep_models:
                    cell.models.append((model, pre, val_ds))
            log.info("%s / %s: %s", entry.name, arch, format_cell(cell.mean, cell.std))
            cells.append(cell)
    return cells


def report(config: SuiteConfig, cells) -> dict:
    return {"config": config.to_dict(), "cells": [c.to_dict() for c in cells]}


def write_report(config: SuiteConfig, cells, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report(config, cells), fh, indent=1)
        fh.write("\n")


def format_cell(mean, std, sig_figs=5) -> str:
    return f"{mean:.{sig_figs}g} ({std:.2g})"


_LABELS = {"regression": "Regression", "k1": "K1", "k1+2": "K1+2", "k1+2+res": "K1+2+Res", "dense": "Dense"}


def format_table(cells, sig_figs: int = 5) -> str:
    """Datasets by architectures, ``mean (std)``; the lowest mean per row gets a ``*``."""
    if not cells:
        raise ValueError("no cells to format")
    datasets, archs = [], []
    for c in cells:
        if c.dataset not in datasets:
            datasets.append(c.dataset)
        if c.architecture not in archs:
            archs.append(c.architecture)
    lookup = {(c.dataset, c.architecture): c for c in cells}
    rows = [["Dataset"] + [_LABELS.get(a, a) for a in archs]]
    for d in datasets:
        row_cells = [lookup.get((d, a)) for a in archs]
        ok = [c for c in row_cells if c is not None and c.values and c.error is None]
        best = min(ok, key=lambda c: c.mean) if ok else None
        row = [d]
        for c in row_cells:
            if c is None:
                row.append("")
            elif c.error is not None or not c.values:
                row.append("error")
            else:
                text = format_cell(c.mean, c.std, sig_figs)
                row.append(text + " *" if c is best else text)
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
