import json
import statistics

import pytest

from regnet.bench import (DatasetEntry, ResultCell, SuiteConfig, format_cell, format_table, report,
                          run_suite, write_report)

QUICK = {"max_epochs": 2, "patience": 2, "batch_size": 128}


def quick_suite(**kw):
    base = dict(datasets=[{"synthetic": "add", "rows": 300}], architectures=["regression", "k1"],
                runs_per_cell=3, train=QUICK)
    base.update(kw)
    return SuiteConfig(**base)


def test_format_cell_examples():
    assert format_cell(47.47613, 0.4012) == "47.476 (0.4)"
    assert format_cell(0.00361111, 0.0001).startswith("0.0036111 ")


def test_cell_statistics():
    c = ResultCell("d", "k1", "mse", "raw", values=[1.0, 2.0, 4.0], raw_values=[2.0, 4.0, 8.0])
    assert c.mean == pytest.approx(7 / 3)
    assert c.std == pytest.approx(statistics.stdev([1.0, 2.0, 4.0]))
    assert c.std == pytest.approx(1.5275252, rel=1e-7)
    assert c.raw_mean == pytest.approx(14 / 3)


def test_format_table_marks_best():
    cells = [ResultCell("add", "k1", "mse", "raw", values=[2.0, 2.0, 2.0]),
             ResultCell("add", "dense", "mse", "raw", values=[1.0, 1.0, 1.0]),
             ResultCell("x", "k1", "mse", "raw", error="boom")]
    text = format_table(cells).splitlines()
    assert text[0].split() == ["Dataset", "K1", "Dense"]
    assert text[2].endswith("1 (0) *")
    assert "error" in text[3]


def test_suite_validation():
    with pytest.raises(ValueError):
        quick_suite(runs_per_cell=2)
    with pytest.raises(ValueError):
        quick_suite(architectures=["k3"])
    with pytest.raises(ValueError):
        DatasetEntry()
    with pytest.raises(TypeError):
        quick_suite(train={"epochs": 3})


def test_suite_cardinality_and_units():
    cfg = quick_suite(datasets=[{"synthetic": "add", "rows": 300},
                                {"synthetic": "add", "rows": 300, "name": "add_std", "target_scaling": "standardize"}])
    cells = run_suite(cfg)
    assert len(cells) == 2 * 2
    assert all(len(c.values) == 3 and c.error is None for c in cells)
    raw = [c for c in cells if c.dataset == "add"]
    std = [c for c in cells if c.dataset == "add_std"]
    assert all(c.units == "raw" and c.values == c.raw_values for c in raw)
    assert all(c.units == "standardized" and c.raw_values[0] > c.values[0] for c in std)


def test_failures_are_recorded_per_cell(tmp_path):
    cfg = quick_suite(datasets=[{"csv": str(tmp_path / "missing.csv"), "schema": str(tmp_path / "s.json")},
                                {"synthetic": "add", "rows": 300}])
    cells = run_suite(cfg)
    assert [c.error is not None for c in cells] == [True, True, False, False]


def test_report_is_deterministic(tmp_path):
    cfg = quick_suite()
    write_report(cfg, run_suite(cfg), tmp_path / "a.json")
    write_report(cfg, run_suite(cfg), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    d = json.loads((tmp_path / "a.json").read_text())
    assert set(d) == {"config", "cells"} and d["config"]["runs_per_cell"] == 3


def test_parallel_matches_serial():
    cfg = quick_suite(architectures=["k1"])
    a = report(cfg, run_suite(cfg, jobs=1))
    b = report(cfg, run_suite(cfg, jobs=2))
    assert a == b
