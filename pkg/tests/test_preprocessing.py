import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaiengine.data import CATEGORICAL, CONTINUOUS, TabularSchema, make_tabular
from xaiengine.errors import SchemaError
from xaiengine.preprocessing import (ColumnDirective, FittedTransform, TransformSpec, fit_transform_spec,
                                     identity_transform, inverse_transform, transform)


def one_col(values, encoding, kind=CONTINUOUS, cats=None, **kw):
    s = TabularSchema((("v", kind),), None, {"v": cats} if cats else {})
    b = make_tabular(s, [[v] for v in values])
    spec = TransformSpec({"v": ColumnDirective(encoding, **kw)})
    return b, fit_transform_spec(spec, b)


def test_standardize_population_std():
    _, ft = one_col(["0", "2"], "standardize")
    st_ = ft.column_stats("v")
    assert st_.mean == 1.0 and st_.std == 1.0


def test_one_hot_slots():
    b, ft = one_col(["a", "b", "c"], "one-hot", CATEGORICAL, ("a", "b", "c"))
    assert ft.width == 3
    np.testing.assert_array_equal(transform(ft, b), np.eye(3))


def test_kbins_two_bins_median_edge():
    _, ft = one_col(["1", "2", "3", "4"], "kbins", n_bins=2)
    edges = ft.column_stats("v").edges
    assert edges == (1.0, 2.5, 4.0)
    assert edges[1] == float(np.median([1, 2, 3, 4]))


def test_identity_matrix_equals_raw():
    s = TabularSchema((("a", CONTINUOUS), ("b", CONTINUOUS)))
    b = make_tabular(s, [["1", "-2"], ["3.5", "4"]])
    np.testing.assert_array_equal(identity_transform(s).transform(b), [[1, -2], [3.5, 4]])


def test_min_max_midpoint():
    b, ft = one_col(["0", "10"], "min-max")
    s = b.schema
    assert ft.transform(make_tabular(s, [["5"]]))[0, 0] == 0.5


def test_ordinal_index():
    b, ft = one_col(["x", "y"], "ordinal", CATEGORICAL, ("x", "y"))
    assert ft.transform(make_tabular(b.schema, [["y"]]))[0, 0] == 1.0


def test_unseen_category_all_zero_block():
    b, ft = one_col(["x", "y"], "one-hot", CATEGORICAL, ("x", "y"))
    new = make_tabular(b.schema, [["z"]])
    np.testing.assert_array_equal(ft.transform(new), [[0.0, 0.0]])


def test_one_hot_inverse_argmax():
    _, ft = one_col(["a", "b", "c"], "one-hot", CATEGORICAL, ("a", "b", "c"))
    out = inverse_transform(ft, [[0.1, 0.7, 0.2]])
    assert out.column("v")[0] == "b"


def test_kbins_inverse_bin_center():
    _, ft = one_col(["1", "1", "3", "3", "5", "5"], "kbins", n_bins=2)
    assert ft.column_stats("v").edges == (1.0, 3.0, 5.0)
    assert inverse_transform(ft, [[0.0]]).column("v")[0] == 2.0


def test_width_mismatch():
    _, ft = one_col(["1", "2"], "identity")
    with pytest.raises(SchemaError):
        ft.inverse_transform(np.zeros((1, 2)))


def test_all_missing_mean_fill_errors():
    with pytest.raises(SchemaError):
        one_col(["", "n/a"], "standardize")
    _, ft = one_col(["", "n/a"], "identity", nan_fill="constant", fill_value=7.0)
    assert ft.column_stats("v").fill == 7.0


def test_nan_fill_before_scaling():
    b, ft = one_col(["1", "", "3"], "standardize", nan_fill="median")
    s = ft.column_stats("v")
    assert s.fill == 2.0
    assert s.mean == 2.0
    assert ft.transform(b)[1, 0] == 0.0


def test_zero_variance_falls_back():
    b, ft = one_col(["4", "4"], "standardize")
    assert ft.column_stats("v").zero_variance
    assert ft.warnings
    np.testing.assert_array_equal(ft.transform(b), [[4.0], [4.0]])


def test_kbins_needs_two_bins():
    with pytest.raises(SchemaError):
        one_col(["1", "2"], "kbins", n_bins=1)


def test_spec_must_cover_schema():
    s = TabularSchema((("a", CONTINUOUS), ("b", CONTINUOUS)))
    b = make_tabular(s, [["1", "2"]])
    with pytest.raises(SchemaError):
        fit_transform_spec(TransformSpec({"a": ColumnDirective("identity")}), b)


def test_transform_serializes(income):
    ft = fit_transform_spec(TransformSpec.default(income.schema), income)
    again = FittedTransform.from_dict(ft.to_dict())
    np.testing.assert_array_equal(again.transform(income), ft.transform(income))


def test_layout_covers_sources_once(income):
    ft = fit_transform_spec(TransformSpec.default(income.schema), income)
    cols = np.concatenate(ft.groups)
    assert sorted(cols) == list(range(ft.width))
    assert [src for src, _ in ft.layout].count("education") == len(income.schema.categories["education"])


def _batch(rows):
    s = TabularSchema((("a", CONTINUOUS), ("b", CONTINUOUS), ("c", CATEGORICAL)), None, {"c": ("p", "q", "r")})
    return make_tabular(s, rows)


rows_st = st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.sampled_from(["p", "q", "r"])),
                   min_size=2, max_size=15)


@settings(max_examples=60, deadline=None)
@given(rows_st, st.sampled_from(["identity", "standardize", "min-max"]), st.sampled_from(["one-hot", "ordinal"]))
def test_round_trip_property(rows, cont, cat):
    b = _batch([list(r) for r in rows])
    ft = fit_transform_spec(TransformSpec.default(b.schema, cont, cat), b)
    back = ft.inverse_transform(ft.transform(b))
    assert list(back.column("c")) == list(b.column("c"))
    for n in ("a", "b"):
        np.testing.assert_allclose(back.column(n), b.column(n), rtol=0, atol=1e-9 * max(1.0, np.abs(b.column(n)).max()))


@settings(max_examples=40, deadline=None)
@given(rows_st, st.randoms(use_true_random=False))
def test_transform_is_row_wise(rows, rnd):
    b = _batch([list(r) for r in rows])
    ft = fit_transform_spec(TransformSpec.default(b.schema), b)
    perm = list(range(b.n_rows))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(ft.transform(b.take(perm)), ft.transform(b)[perm])


@settings(max_examples=40, deadline=None)
@given(rows_st)
def test_one_hot_sums(rows):
    b = _batch([list(r) for r in rows])
    ft = fit_transform_spec(TransformSpec.default(b.schema), b)
    m = ft.transform(b)
    g = ft.groups[2]
    np.testing.assert_array_equal(m[:, g].sum(axis=1), 1.0)
