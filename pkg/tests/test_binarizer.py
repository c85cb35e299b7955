import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tmids.binarizer import QuantileBinarizer, quantile_edges
from tmids.exceptions import DimensionError, UsageError


def order_statistic_quantile(values, p):
    """Linear interpolation between order statistics, position (n - 1) * p."""
    v = sorted(values)
    h = (len(v) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def fitted(edges):
    b = QuantileBinarizer(n_bins=len(edges) + 1)
    b.edges_ = [np.asarray(edges, dtype=float)]
    b.n_features_in_ = 1
    b.feature_names_in_ = np.array(["f"], dtype=object)
    b._offsets()
    return b


def test_edges_one_to_hundred():
    edges = quantile_edges(np.arange(1, 101), 5)
    np.testing.assert_allclose(edges, [20.8, 40.6, 60.4, 80.2], atol=1e-12)


def test_constant_column_single_bin():
    b = QuantileBinarizer(5).fit(np.array([[7.0], [7.0], [7.0], [7.0], [7.0]]))
    assert b.n_bins_.tolist() == [1]
    assert b.transform([[7.0], [-1e300], [1e300]]).tolist() == [[1], [1], [1]]


def test_two_value_column():
    edges = quantile_edges([0, 0, 0, 1], 2)
    assert edges.tolist() == [0.0]
    b = QuantileBinarizer(2).fit(np.array([[0.0], [0.0], [0.0], [1.0]]))
    assert b.n_bins_.tolist() == [2]


@pytest.mark.parametrize("value, bits", [(5, [1, 0, 0]), (10, [0, 1, 0]), (19.999, [0, 1, 0]), (20, [0, 0, 1]), (99, [0, 0, 1])])
def test_half_open_intervals(value, bits):
    assert fitted([10, 20]).transform([[value]])[0].tolist() == bits


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=60), st.integers(2, 8))
def test_edges_match_order_statistics(col, n_bins):
    col = np.array(col)
    if col.min() == col.max():
        assert quantile_edges(col, n_bins).size == 0
        return
    want = sorted({order_statistic_quantile(col.tolist(), k / n_bins) for k in range(1, n_bins)})
    got = quantile_edges(col, n_bins)
    # duplicates collapse in both; compare values at 1e-9 scaled tolerance
    assert len(got) <= n_bins - 1
    np.testing.assert_allclose(got, np.unique(np.array(want)), rtol=1e-9, atol=1e-9 * max(1.0, np.abs(col).max()))
    assert np.all(np.diff(got) > 0)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(5, 40), st.integers(1, 5)), elements=st.floats(-1e9, 1e9)),
    arrays(np.float64, st.tuples(st.integers(1, 30), st.just(5)), elements=st.floats(allow_nan=False)),
    st.integers(2, 5),
)
def test_one_hot_blocks_and_monotone(train, probe, n_bins):
    b = QuantileBinarizer(n_bins).fit(train)
    d = train.shape[1]
    probe = probe[:, :d]
    bits = b.transform(probe)
    assert bits.shape == (len(probe), int(b.n_bins_.sum()))
    for f in range(d):
        block = bits[:, b.offsets_[f]:b.offsets_[f] + b.n_bins_[f]]
        assert (block.sum(axis=1) == 1).all()
        order = np.argsort(probe[:, f], kind="stable")
        idx = b.bin_indices(probe)[order, f]
        assert np.all(np.diff(idx) >= 0)


def test_extremes_and_infinities():
    b = QuantileBinarizer(4).fit(np.arange(20.0).reshape(-1, 1))
    idx = b.bin_indices([[-np.inf], [np.finfo(float).min], [np.finfo(float).max], [np.inf]])[:, 0]
    assert idx.tolist() == [0, 0, 3, 3]


def test_nan_rejected():
    b = QuantileBinarizer(3).fit(np.arange(10.0).reshape(-1, 1))
    with pytest.raises(ValueError, match="NaN"):
        b.transform([[np.nan]])


def test_occupancy_near_uniform():
    rng = np.random.default_rng(0)
    for n, n_bins in [(1000, 5), (997, 5), (123, 4), (50, 7)]:
        col = rng.permutation(rng.normal(size=n) * 10)
        b = QuantileBinarizer(n_bins).fit(col.reshape(-1, 1))
        counts = np.bincount(b.bin_indices(col.reshape(-1, 1))[:, 0], minlength=n_bins)
        assert np.all(np.abs(counts - n / n_bins) <= 1 + 1e-9), counts


def test_transform_does_not_mutate():
    X = np.random.default_rng(1).normal(size=(100, 3))
    b = QuantileBinarizer(5).fit(X)
    before = [e.copy() for e in b.edges_]
    b.transform(X * 3)
    for e0, e1 in zip(before, b.edges_):
        np.testing.assert_array_equal(e0, e1)


def test_round_trip_json():
    rng = np.random.default_rng(2)
    X = rng.exponential(size=(300, 4))
    X[:, 2] = 0
    b = QuantileBinarizer(5).fit(X, feature_names=["a", "b", "c", "d"])
    back = QuantileBinarizer.from_json(b.to_json())
    probe = rng.normal(size=(500, 4)) * 3
    np.testing.assert_array_equal(back.transform(probe), b.transform(probe))
    assert list(back.get_feature_names_out()) == list(b.get_feature_names_out())


def test_feature_names_and_describe_bit():
    b = fitted([10, 20])
    assert list(b.get_feature_names_out()) == ["f_bin0", "f_bin1", "f_bin2"]
    assert b.describe_bit(0) == ("f", 0, -np.inf, 10.0)
    assert b.describe_bit(2) == ("f", 2, 20.0, np.inf)
    assert b.describe_bit(1, inverse=lambda f, v: v * 2) == ("f", 1, 20.0, 40.0)


def test_matches_sklearn_on_distinct_values():
    from sklearn.preprocessing import KBinsDiscretizer

    X = np.random.default_rng(3).normal(size=(400, 3))
    ours = QuantileBinarizer(5).fit(X)
    ref = KBinsDiscretizer(n_bins=5, encode="onehot-dense", strategy="quantile", quantile_method="linear").fit(X)
    np.testing.assert_array_equal(ours.transform(X), ref.transform(X))


def test_errors():
    with pytest.raises(UsageError):
        QuantileBinarizer(1).fit(np.zeros((5, 1)))
    with pytest.raises(UsageError):
        QuantileBinarizer(5).fit(np.zeros((3, 1)))
    with pytest.raises(UsageError):
        QuantileBinarizer(5).fit(np.zeros((0, 1)))
    b = QuantileBinarizer(2).fit(np.arange(8.0).reshape(-1, 2))
    with pytest.raises(DimensionError):
        b.transform(np.zeros((1, 3)))
