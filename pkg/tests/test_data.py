import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaiengine.data import (CATEGORICAL, CONTINUOUS, TabularBatch, TabularSchema, TimeseriesWindow,
                            batch_from_array, infer_schema, make_tabular, make_timeseries, read_csv,
                            read_series_csv, write_csv)
from xaiengine.errors import SchemaError


def test_infer_numeric_column():
    s = infer_schema(["a"], [["1.5"], ["2"]])
    assert s.kind("a") == CONTINUOUS


def test_infer_categorical_first_seen_order():
    s = infer_schema(["c"], [["x"], ["y"], ["x"]])
    assert s.kind("c") == CATEGORICAL
    assert s.categories["c"] == ("x", "y")


def test_infer_ignores_missing_markers():
    s = infer_schema(["m"], [["1"], ["n/a"], ["3"]])
    assert s.kind("m") == CONTINUOUS
    s = infer_schema(["m"], [["1"], ["N/A"], [""]])
    assert s.kind("m") == CONTINUOUS


def test_infer_is_deterministic():
    rows = [["b", "1"], ["a", "x"], ["c", "2"]]
    assert infer_schema(["p", "q"], rows) == infer_schema(["p", "q"], rows)
    assert infer_schema(["p", "q"], rows).categories["q"] == ("1", "x", "2")


def test_infer_errors():
    with pytest.raises(SchemaError):
        infer_schema(["a", "a"], [["1", "2"]])
    with pytest.raises(SchemaError):
        infer_schema(["a"], [["1"]], target="zzz")


def test_schema_invariants():
    with pytest.raises(SchemaError):
        TabularSchema((("", CONTINUOUS),))
    with pytest.raises(SchemaError):
        TabularSchema((("c", CATEGORICAL),), None, {"c": ()})
    with pytest.raises(SchemaError):
        TabularSchema((("c", CATEGORICAL),), None, {"c": ("x", "x")})


def test_empty_batch():
    s = TabularSchema((("a", CONTINUOUS),))
    b = make_tabular(s, [])
    assert b.n_rows == 0
    assert len(b.column("a")) == 0


def test_unseen_category_appended():
    s = TabularSchema((("c", CATEGORICAL),), None, {"c": ("x", "y")})
    b = make_tabular(s, [["x"], ["z"]])
    assert b.schema.categories["c"] == ("x", "y", "z")


def test_round_trip_3x2():
    s = TabularSchema((("a", CONTINUOUS), ("c", CATEGORICAL)), None, {"c": ("u", "v")})
    b = make_tabular(s, [["1", "u"], ["2.5", "v"], ["", "u"]])
    assert b.n_rows == 3
    assert TabularBatch.from_dict(b.to_dict()) == b


def test_make_tabular_rejects():
    s = TabularSchema((("a", CONTINUOUS),))
    with pytest.raises(SchemaError):
        make_tabular(s, [["1", "2"]])
    with pytest.raises(SchemaError):
        make_tabular(s, [["inf"]])
    with pytest.raises(SchemaError):
        make_tabular(s, [["abc"]])


def test_missing_cells(small_batch):
    assert np.isnan(small_batch.column("a")[2])
    assert small_batch.column("a")[0] == 1.5


def test_columns_are_read_only(small_batch):
    with pytest.raises(ValueError):
        small_batch.column("a")[0] = 9.0


def test_timeseries_examples():
    assert len(make_timeseries([0], [1.0])) == 1
    assert len(make_timeseries([0, 1], [1.0, 2.0])) == 2
    with pytest.raises(SchemaError):
        make_timeseries([1, 0], [1.0, 2.0])
    with pytest.raises(SchemaError):
        make_timeseries([0, 1], [1.0])
    with pytest.raises(SchemaError):
        make_timeseries([0, 1], [1.0, float("nan")])
    with pytest.raises(SchemaError):
        make_timeseries([], [])


def test_timeseries_round_trip():
    w = make_timeseries([10, 20, 35], [0.5, -1.0, 2.25], "cpu")
    assert TimeseriesWindow.from_dict(w.to_dict()) == w


def test_csv_round_trip(tmp_path):
    s = TabularSchema((("a", CONTINUOUS), ("c", CATEGORICAL)), "c", {"c": ("a,b", "q")})
    b = make_tabular(s, [["0.1", "a,b"], ["1e-300", "q"], ["", "q"]])
    p = tmp_path / "x.csv"
    p.write_text(write_csv(b))
    assert read_csv(p, s) == b


def test_read_csv_sidecar_without_target(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,c\n1,u\n2,v\n")
    doc = {"columns": [{"name": "a", "kind": "continuous"}, {"name": "c", "kind": "categorical"},
                       {"name": "y", "kind": "categorical"}], "target": "y"}
    b = read_csv(p, doc)
    assert b.schema.names == ["a", "c"]
    assert b.schema.categories["c"] == ("u", "v")


def test_read_series_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("timestamp,value\n0,1.5\n60,2\n")
    w = read_series_csv(p)
    assert list(w.timestamps) == [0, 60]
    assert list(w.values) == [1.5, 2.0]


cells = st.one_of(st.floats(allow_nan=False, allow_infinity=False, width=32).map(repr),
                  st.sampled_from(["", "n/a", "N/A"]))
labels = st.sampled_from(["a", "b", "c", "", "n/a"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(cells, labels), min_size=0, max_size=12))
def test_valid_grids_accepted_and_round_trip(rows):
    s = TabularSchema((("x", CONTINUOUS), ("k", CATEGORICAL)), None, {"k": ("a",)})
    b = make_tabular(s, [list(r) for r in rows])
    assert b.n_rows == len(rows)
    assert TabularBatch.from_dict(b.to_dict()) == b


@settings(max_examples=60, deadline=None)
@given(st.lists(cells, min_size=1, max_size=8), st.integers(0, 7),
       st.sampled_from(["inf", "-inf", "nan", "abc", "1..2"]))
def test_invalid_continuous_cells_rejected(col, pos, bad):
    s = TabularSchema((("x", CONTINUOUS),))
    rows = [[c] for c in col]
    rows[pos % len(rows)] = [bad]
    with pytest.raises(SchemaError):
        make_tabular(s, rows)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=20, unique=True),
       st.lists(st.floats(-1e6, 1e6), min_size=20, max_size=20))
def test_timeseries_accepts_iff_increasing(ts, vals):
    vals = vals[:len(ts)]
    increasing = all(a < b for a, b in zip(ts, ts[1:]))
    if increasing:
        assert len(make_timeseries(ts, vals)) == len(ts)
    else:
        with pytest.raises(SchemaError):
            make_timeseries(ts, vals)


def test_batch_from_array_names():
    b = batch_from_array([[1, 2], [3, 4]], ["p", "q"])
    assert b.schema.names == ["p", "q"]
    assert list(b.column("q")) == [2.0, 4.0]
