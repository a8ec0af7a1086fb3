import numpy as np
import pytest

from regnet.data import (RawDataset, SchemaConfig, SchemaError, apply_preprocessor, fit_preprocessor,
                         load_csv, prepare, split, write_csv)
from regnet.model import GroupKind, Task


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


SCHEMA = SchemaConfig(target="z", columns={"x": "continuous", "a": "categorical"})


def raw_table(n=10, seed=0):
    rng = np.random.default_rng(seed)
    return RawDataset({"x": rng.normal(size=n), "a": np.array([str(i % 3) for i in range(n)], dtype=object),
                       "z": rng.normal(size=n)},
                      {"x": "continuous", "a": "categorical", "z": "target"}, "z")


def test_load_csv_types(tmp_path):
    raw = load_csv(write(tmp_path, "x,a,z\n1.5,red,2\n-0.5,blue,3\n"), SCHEMA)
    assert raw.n_rows == 2
    assert raw.columns["x"].tolist() == [1.5, -0.5]
    assert raw.columns["a"].tolist() == ["red", "blue"]
    assert raw.columns["z"].dtype == np.float64


def test_load_csv_drops_bad_rows(tmp_path):
    raw = load_csv(write(tmp_path, "x,a,z\n1,r,2\n,r,3\nfoo,r,1\n2,r,\n3,b,4\n"), SCHEMA)
    assert raw.n_rows == 2 and raw.dropped == 3


def test_load_csv_missing_column(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "x,z\n1,2\n"), SCHEMA)


def test_load_csv_undeclared_column(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "x,a,w,z\n1,r,5,2\n"), SCHEMA)


def test_ignored_columns_are_dropped(tmp_path):
    schema = SchemaConfig(target="z", columns={"x": "continuous", "id": "ignored"})
    raw = load_csv(write(tmp_path, "id,x,z\n7,1,2\n8,2,3\n"), schema)
    assert raw.features == ["x"]


def test_schema_rejects_unknown_kind():
    with pytest.raises(SchemaError):
        SchemaConfig(target="z", columns={"x": "numeric"})


def test_schema_defaults_and_sidecar_nesting():
    assert SCHEMA.target_scaling == "standardize"
    assert SchemaConfig(target="z", columns={}, task="binary").target_scaling == "none"
    nested = SchemaConfig.from_dict({"dataset": "add", "schema": SCHEMA.to_dict()})
    assert nested.to_dict() == SCHEMA.to_dict()


def test_csv_round_trip_is_exact(tmp_path):
    raw = raw_table(20)
    write_csv(raw, tmp_path / "r.csv")
    back = load_csv(tmp_path / "r.csv", SCHEMA)
    assert np.array_equal(back.columns["x"], raw.columns["x"])
    assert back.columns["a"].tolist() == raw.columns["a"].tolist()


def test_split_sizes_and_disjointness():
    raw = raw_table(10)
    raw.columns["x"] = np.arange(10.0)
    tr, va = split(raw, 0.2, seed=0)
    assert (tr.n_rows, va.n_rows) == (8, 2)
    assert sorted(tr.columns["x"].tolist() + va.columns["x"].tolist()) == list(range(10))


def test_split_is_deterministic():
    raw = raw_table(50)
    a, b = split(raw, 0.3, seed=4), split(raw, 0.3, seed=4)
    assert np.array_equal(a[1].columns["x"], b[1].columns["x"])
    c = split(raw, 0.3, seed=5)
    assert not np.array_equal(a[1].columns["x"], c[1].columns["x"])


@pytest.mark.parametrize("f", [0.0, 1.0, -0.1])
def test_split_rejects_bad_fraction(f):
    with pytest.raises(ValueError):
        split(raw_table(), f)


def test_standardization_uses_population_sd():
    raw = raw_table(3)
    raw.columns["x"] = np.array([1.0, 2.0, 3.0])
    pre = fit_preprocessor(raw, SCHEMA)
    assert pre.continuous["x"]["mean"] == 2.0
    assert pre.continuous["x"]["sd"] == pytest.approx(0.8165, abs=1e-4)
    enc = pre.encode_feature("x", [1.0, 2.0, 3.0])[:, 0]
    assert enc.mean() == pytest.approx(0.0, abs=1e-12) and enc.std() == pytest.approx(1.0)


def test_constant_column_encodes_to_zero():
    raw = raw_table(5)
    raw.columns["x"] = np.full(5, 7.0)
    pre = fit_preprocessor(raw, SCHEMA)
    assert np.all(pre.encode_feature("x", raw.columns["x"]) == 0.0)


def test_vocabulary_is_sorted_and_onehot_rows_sum_to_one():
    raw = raw_table(6)
    raw.columns["a"] = np.array(["c", "a", "b", "a", "c", "c"], dtype=object)
    pre = fit_preprocessor(raw, SCHEMA)
    assert pre.categorical["a"]["vocabulary"] == ["a", "b", "c"]
    block = pre.encode_feature("a", raw.columns["a"])
    assert block.shape == (6, 3) and np.all(block.sum(axis=1) == 1.0)
    assert block[0].tolist() == [0.0, 0.0, 1.0]


def test_high_cardinality_falls_back_to_ordinal():
    raw = raw_table(40)
    raw.columns["a"] = np.array([f"v{i % 20:02d}" for i in range(40)], dtype=object)
    pre = fit_preprocessor(raw, SCHEMA)
    assert pre.categorical["a"]["encoding"] == "ordinal"
    codes = pre.encode_feature("a", ["v00", "v07", "v19"])[:, 0]
    assert codes.tolist() == [0.0, 7.0, 19.0]
    assert pre.schema()[1].kind is GroupKind.ORDINAL


def test_encoding_override():
    schema = SchemaConfig(target="z", columns={"x": "continuous", "a": "categorical"}, encoding={"a": "ordinal"})
    pre = fit_preprocessor(raw_table(), schema)
    assert pre.categorical["a"]["encoding"] == "ordinal"


def test_unseen_category_errors():
    pre = fit_preprocessor(raw_table(), SCHEMA)
    with pytest.raises(ValueError, match="unseen"):
        pre.encode_feature("a", ["zzz"])


def test_no_validation_leakage():
    raw = raw_table(200)
    tr, va = split(raw, 0.2, 1)
    va.columns["x"] = va.columns["x"] + 1000.0
    pre_a = fit_preprocessor(tr, SCHEMA)
    pre_b = fit_preprocessor(tr, SCHEMA)
    assert pre_a.to_dict() == pre_b.to_dict()
    assert pre_a.continuous["x"]["mean"] == pytest.approx(float(np.mean(tr.columns["x"])))


def test_target_round_trip():
    raw = raw_table(30)
    pre = fit_preprocessor(raw, SCHEMA)
    y = raw.columns["z"]
    np.testing.assert_allclose(pre.inverse_target(pre.transform_target(y)), y, rtol=0, atol=1e-12)
    assert pre.mse_scale() == pytest.approx(np.var(y))


def test_binary_labels():
    raw = raw_table(6)
    raw.columns["z"] = np.array(["yes", "no", "yes", "no", "no", "no"], dtype=object)
    raw.task = Task.BINARY
    schema = SchemaConfig(target="z", columns=SCHEMA.columns, task="binary")
    pre = fit_preprocessor(raw, schema)
    assert pre.target_classes == ["no", "yes"]
    assert apply_preprocessor(pre, raw).y.tolist() == [1, 0, 1, 0, 0, 0]


def test_prepare_schema_layout():
    tr, va, pre = prepare(raw_table(30), SCHEMA, 0.2, 0)
    assert tr.X.shape == (24, 4) and va.X.shape == (6, 4)
    assert [g.width for g in tr.schema] == [1, 3]


def test_preprocessor_dict_round_trip():
    pre = fit_preprocessor(raw_table(), SCHEMA)
    assert type(pre).from_dict(pre.to_dict()).to_dict() == pre.to_dict()
