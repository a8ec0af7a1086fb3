"""Synthetic benchmark datasets with known generating functions.

Variables: x ~ N(1, 2), y ~ N(-4, 3.5), q ~ N(0, 1) (second argument is the
standard deviation), a uniform on {0, 1, 2, 3}, b uniform on {0, 1}.

Two formulas are amended so that every row is well defined:

* ``complex``: z = x^2 + y - q + sqrt(|x q| + 1e-4) + log(|y + q| + 1e-4).
* ``importance``: z = x + y + 0.2 x ln(|y| / 100 + 1e-4).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CATEGORICAL, CONTINUOUS, RawDataset, SchemaConfig, write_csv
from .model import Task

NAMES = ("add", "add_multiply", "complex", "importance", "categorical", "categorical_interact")

_ALIASES = {
    "addmultiply": "add_multiply", "add-multiply": "add_multiply", "add_and_multiply": "add_multiply",
    "categoricalinteract": "categorical_interact", "categorical-interact": "categorical_interact",
}

FORMULAS = {
    "add": "z = x + y",
    "add_multiply": "z = x + y + x*y",
    "complex": "z = x^2 + y - q + sqrt(|x*q| + 0.0001) + log(|y + q| + 0.0001)",
    "importance": "z = x + y + 0.2*x*ln(|y|/100 + 0.0001)",
    "categorical": "z = f(a) + g(b)",
    "categorical_interact": "z = x + y + x*y + f(a) + g(b) + h(a, b)",
}

COLUMNS = {
    "add": ("x", "y"),
    "add_multiply": ("x", "y"),
    "complex": ("x", "y", "q"),
    "importance": ("x", "y"),
    "categorical": ("a", "b"),
    "categorical_interact": ("x", "y", "a", "b"),
}

DEFAULT_MAP_SEED = 20210

# uniform(-5, 5) draws for DEFAULT_MAP_SEED, rounded to 3 decimals and frozen
_DEFAULT_F = (-0.732, -0.879, -3.102, -4.136)
_DEFAULT_G = (-2.492, -0.688)
_DEFAULT_H = ((-0.385, -3.835), (-0.014, -2.249), (2.121, -2.392), (4.828, -3.72))


def canonical_name(name: str) -> str:
    key = name.strip().lower().replace(" ", "_").replace("&", "and")
    key = _ALIASES.get(key, key)
    if key not in NAMES:
        raise ValueError(f"unknown synthetic dataset {name!r}; choose from {NAMES}")
    return key


@dataclass(frozen=True)
class CategoricalMaps:
    f: tuple  # indexed by a
    g: tuple  # indexed by b
    h: tuple  # h[a][b]

    def is_decomposable(self) -> bool:
        """True when h(a,b) + h(a',b') == h(a,b') + h(a',b) for every 2x2 sub-square."""
        h = np.asarray(self.h)
        for a in range(4):
            for a2 in range(a + 1, 4):
                if h[a, 0] + h[a2, 1] != h[a, 1] + h[a2, 0]:
                    return False
        return True

    def to_dict(self) -> dict:
        return {"f": list(self.f), "g": list(self.g), "h": [list(r) for r in self.h]}


def categorical_maps(seed: int = DEFAULT_MAP_SEED) -> CategoricalMaps:
    if seed == DEFAULT_MAP_SEED:
        maps = CategoricalMaps(_DEFAULT_F, _DEFAULT_G, _DEFAULT_H)
    else:
        rng = np.random.default_rng(seed)
        while True:
            maps = CategoricalMaps(
                tuple(np.round(rng.uniform(-5, 5, 4), 3).tolist()),
                tuple(np.round(rng.uniform(-5, 5, 2), 3).tolist()),
                tuple(tuple(r) for r in np.round(rng.uniform(-5, 5, (4, 2)), 3).tolist()),
            )
            if not maps.is_decomposable():
                break
    if maps.is_decomposable():
        raise AssertionError("interaction map h must not be additively decomposable")
    return maps


def ground_truth(name: str, maps: CategoricalMaps | None = None):
    """Noise-free generating function taking a mapping of column arrays."""
    name = canonical_name(name)
    maps = maps or categorical_maps()
    f = np.asarray(maps.f)
    g = np.asarray(maps.g)
    h = np.asarray(maps.h)

    def cat(cols, key):
        return np.asarray(cols[key]).astype(np.int64)

    def fn(cols):
        if name == "add":
            return cols["x"] + cols["y"]
        if name == "add_multiply":
            return cols["x"] + cols["y"] + cols["x"] * cols["y"]
        if name == "complex":
            x, y, q = cols["x"], cols["y"], cols["q"]
            return x**2 + y - q + np.sqrt(np.abs(x * q) + 0.0001) + np.log(np.abs(y + q) + 0.0001)
        if name == "importance":
            x, y = cols["x"], cols["y"]
            return x + y + 0.2 * x * np.log(np.abs(y) / 100 + 0.0001)
        a, b = cat(cols, "a"), cat(cols, "b")
        if name == "categorical":
            return f[a] + g[b]
        x, y = cols["x"], cols["y"]
        return x + y + x * y + f[a] + g[b] + h[a, b]

    return fn


def schema_for(name: str) -> SchemaConfig:
    """Schema config for a generated file.

    Targets stay in raw units so losses are comparable with the published
    synthetic results.
    """
    name = canonical_name(name)
    kinds = {c: (CATEGORICAL if c in ("a", "b") else CONTINUOUS) for c in COLUMNS[name]}
    return SchemaConfig(target="z", columns=kinds, task=Task.REGRESSION, target_scaling="none")


def generate(name: str, n_rows: int = 10000, seed: int = 0,
             maps: CategoricalMaps | None = None) -> RawDataset:
    name = canonical_name(name)
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    maps = maps or categorical_maps()
    rng = np.random.default_rng(seed)
    # every variable is drawn so datasets with the same seed share x, y
    draws = {
        "x": rng.normal(1.0, 2.0, n_rows),
        "y": rng.normal(-4.0, 3.5, n_rows),
        "q": rng.normal(0.0, 1.0, n_rows),
        "a": rng.integers(0, 4, n_rows),
        "b": rng.integers(0, 2, n_rows),
    }
    cols = {c: draws[c] for c in COLUMNS[name]}
    z = ground_truth(name, maps)(cols)
    columns, kinds = {}, {}
    for c in COLUMNS[name]:
        if c in ("a", "b"):
            columns[c] = np.array([str(int(v)) for v in cols[c]], dtype=object)
            kinds[c] = CATEGORICAL
        else:
            columns[c] = cols[c]
            kinds[c] = CONTINUOUS
    columns["z"] = z
    kinds["z"] = "target"
    return RawDataset(columns, kinds, "z", Task.REGRESSION)


def sidecar(name: str, n_rows: int, seed: int, maps: CategoricalMaps | None = None) -> dict:
    name = canonical_name(name)
    maps = maps or categorical_maps()
    return {
        "dataset": name,
        "rows": n_rows,
        "seed": seed,
        "formula": FORMULAS[name],
        "variables": {"x": "N(1, 2)", "y": "N(-4, 3.5)", "q": "N(0, 1)",
                      "a": "uniform{0,1,2,3}", "b": "uniform{0,1}"},
        "categorical_maps": maps.to_dict(),
        "schema": schema_for(name).to_dict(),
    }


def write_dataset(name: str, out_dir, n_rows: int = 10000, seed: int = 0):
    """Write ``<name>.csv`` and ``<name>.json``; returns both paths."""
    name = canonical_name(name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.json"
    write_csv(generate(name, n_rows, seed), csv_path)
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar(name, n_rows, seed), fh, indent=2)
        fh.write("\n")
    return csv_path, meta_path
