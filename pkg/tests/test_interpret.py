import json

import numpy as np
import pytest

from regnet.interpret import (ARCHIVE_VERSION, ArchiveError, FunctionGrid, Axis, additive_fit, grid_1d,
                              grid_2d, load_archive, load_model, save_model)
from regnet.model import FeatureGroup, architecture_spec, build_model, decompose, predict


def test_grid_1d_continuous_axis(mixed_fit):
    model, pre, _, _ = mixed_fit
    g = grid_1d(model, pre, "x", 50)
    lo, hi = pre.continuous["x"]["min"], pre.continuous["x"]["max"]
    assert g.values.shape == (50,)
    assert g.axes[0].values[0] == lo and g.axes[0].values[-1] == hi


def test_grid_1d_categorical_axis(mixed_fit):
    model, pre, _, _ = mixed_fit
    g = grid_1d(model, pre, "a")
    assert g.axes[0].values == ["0", "1", "2", "3"] and g.values.shape == (4,)


def test_grid_matches_decomposition(mixed_fit):
    model, pre, _, _ = mixed_fit
    g = grid_1d(model, pre, "x", 20)
    X = np.zeros((20, model.n_columns))
    X[:, model.schema[0].start] = pre.encode_feature("x", g.axes[0].values)[:, 0]
    np.testing.assert_allclose(decompose(model, X)[(0,)], g.values, rtol=0, atol=1e-12)


def test_grid_2d_matches_decomposition(mixed_fit):
    model, pre, _, _ = mixed_fit
    g = grid_2d(model, pre, ("a", "x"), 7)
    assert g.subset == (0, 2)
    assert [a.name for a in g.axes] == ["x", "a"]
    cols = model.columns((0, 2))
    x_block = pre.encode_feature("x", g.axes[0].values)
    a_block = pre.encode_feature("a", g.axes[1].values)
    for i in range(7):
        for j in range(4):
            X = np.zeros((1, model.n_columns))
            X[0, cols] = np.concatenate([x_block[i], a_block[j]])
            assert decompose(model, X)[(0, 2)][0] == pytest.approx(g.values[i, j], abs=1e-12)


def test_combined_grid_is_exact_sum(mixed_fit):
    model, pre, _, _ = mixed_fit
    pure = grid_2d(model, pre, ("x", "y"), 9)
    both = grid_2d(model, pre, ("x", "y"), 9, combined=True)
    gx, gy = grid_1d(model, pre, "x", 9), grid_1d(model, pre, "y", 9)
    expected = pure.values + gx.values[:, None] + gy.values[None, :]
    assert np.max(np.abs(both.values - expected)) <= 1e-12


def test_missing_subset_errors(mixed_fit):
    model, pre, _, _ = mixed_fit
    with pytest.raises(ValueError):
        grid_1d(model, pre, "nope")
    with pytest.raises(ValueError):
        grid_2d(model, pre, ("x",))


def test_additive_fit_residual():
    r, c = np.arange(4.0)[:, None], np.array([[1.0, -2.0, 5.0]])
    fit, resid = additive_fit(r + c)
    assert np.max(np.abs(resid)) < 1e-12
    _, resid = additive_fit(r * c)
    assert np.ptp(resid) > 1.0


def test_grid_validates_values():
    with pytest.raises(ValueError):
        FunctionGrid((0,), [Axis("x", "continuous", [0.0, 1.0])], np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        FunctionGrid((0,), [Axis("x", "continuous", [0.0, 1.0])], np.zeros(3))


def test_grid_csv_long_form(tmp_path, mixed_fit):
    model, pre, _, _ = mixed_fit
    g = grid_2d(model, pre, ("x", "b"), 5)
    g.write_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,b,value" and len(lines) == 1 + 5 * 2
    g.write_json(tmp_path / "g.json")
    assert np.array(json.loads((tmp_path / "g.json").read_text())["values"]).shape == (5, 2)


def test_archive_round_trip(tmp_path, mixed_fit):
    model, pre, history, val = mixed_fit
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    save_model(model, p1, pre, history, {"note": "t"})
    archive = load_archive(p1)
    save_model(archive.model, p2, archive.preprocessor, archive.history, archive.data)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(predict(archive.model, val.X), predict(model, val.X))
    assert archive.model.param_bytes() == model.param_bytes()
    assert list(archive.model.subnets) == list(model.subnets)
    assert archive.data == {"note": "t"}


def test_archive_lists_every_subset(tmp_path):
    schema = [FeatureGroup(n, "continuous", i) for i, n in enumerate("abc")]
    save_model(build_model(schema, architecture_spec("k1+2"), seed=0), tmp_path / "m.json")
    subsets = [tuple(s["subset"]) for s in json.loads((tmp_path / "m.json").read_text())["subnets"]]
    assert subsets == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]


def test_archive_axes_round_trip(tmp_path, mixed_fit):
    model, pre, _, _ = mixed_fit
    save_model(model, tmp_path / "m.json", pre)
    back = load_archive(tmp_path / "m.json")
    a = grid_1d(model, pre, "y", 30).axes[0].values
    b = grid_1d(back.model, back.preprocessor, "y", 30).axes[0].values
    assert np.max(np.abs(np.array(a) - np.array(b))) <= 1e-9


def test_truncated_archive(tmp_path, mixed_fit):
    model, pre, _, _ = mixed_fit
    p = tmp_path / "m.json"
    save_model(model, p, pre)
    p.write_text(p.read_text()[:-200])
    with pytest.raises(ArchiveError):
        load_model(p)


def test_wrong_version(tmp_path, mixed_fit):
    model, _, _, _ = mixed_fit
    p = tmp_path / "m.json"
    save_model(model, p)
    d = json.loads(p.read_text())
    d["version"] = ARCHIVE_VERSION + 1
    p.write_text(json.dumps(d))
    with pytest.raises(ArchiveError, match="version"):
        load_model(p)


def test_width_mismatch_rejected(tmp_path, mixed_fit):
    model, _, _, _ = mixed_fit
    p = tmp_path / "m.json"
    save_model(model, p)
    d = json.loads(p.read_text())
    d["schema"][2]["cardinality"] = 5  # a now claims 5 categories
    p.write_text(json.dumps(d))
    with pytest.raises(ArchiveError):
        load_model(p)


def test_non_finite_history_is_nulled(tmp_path, mixed_fit):
    model, _, _, _ = mixed_fit
    save_model(model, tmp_path / "m.json", history={"best": float("inf")})
    assert load_archive(tmp_path / "m.json").history == {"best": None}
