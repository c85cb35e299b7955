"""Quantile binning with dense one-hot output.

Interior edges of each feature are its ``k / n_bins`` quantiles
(``k = 1 .. n_bins - 1``), using linear interpolation between order
statistics. Repeated edges collapse, so skewed columns get fewer bins and
a constant column gets exactly one. Bins are half-open: a value ``v`` lands
in bin ``b`` when ``edges[b-1] <= v < edges[b]``.
"""

from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionError, UsageError


def quantile_edges(column, n_bins):
    column = np.asarray(column, dtype=np.float64)
    if column.min() == column.max():
        return np.empty(0)
    probs = np.arange(1, n_bins) / n_bins
    return np.unique(np.quantile(column, probs, method="linear"))


class QuantileBinarizer(TransformerMixin, BaseEstimator):
    """Per-feature quantile bins, one-hot encoded.

    Parameters
    ----------
    n_bins : int, default=5
        Requested bins per feature before degenerate edges collapse.
    """

    def __init__(self, n_bins=5):
        self.n_bins = n_bins

    def fit(self, X, y=None, feature_names=None):
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise UsageError(f"n_bins must be an integer >= 2, got {self.n_bins}")
        if hasattr(X, "columns") and feature_names is None:
            feature_names = [str(c) for c in X.columns]
        if len(X) == 0:
            raise UsageError("cannot fit bins on an empty table")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < self.n_bins:
            raise UsageError(f"need at least n_bins={self.n_bins} rows, got {X.shape[0]}")
        self.n_features_in_ = X.shape[1]
        self.edges_ = [quantile_edges(X[:, i], self.n_bins) for i in range(X.shape[1])]
        if feature_names is None:
            feature_names = [f"f{i}" for i in range(X.shape[1])]
        self.feature_names_in_ = np.asarray(feature_names, dtype=object)
        self._offsets()
        return self

    def _offsets(self):
        counts = np.array([len(e) + 1 for e in self.edges_], dtype=np.int64)
        self.n_bins_ = counts
        self.offsets_ = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        self.n_output_ = int(counts.sum())

    def bin_indices(self, X):
        """Ordinal bin index per feature, shape ``(n_samples, n_features)``."""
        check_is_fitted(self, "edges_")
        X = check_array(X, dtype=np.float64, ensure_all_finite=False)
        if np.isnan(X).any():
            rows = np.unique(np.nonzero(np.isnan(X))[0])[:5].tolist()
            raise ValueError(f"NaN in input rows {rows}; clean the table first")
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, binarizer has {self.n_features_in_}")
        out = np.empty(X.shape, dtype=np.int64)
        for i, edges in enumerate(self.edges_):
            out[:, i] = np.searchsorted(edges, X[:, i], side="right")
        return out

    def transform(self, X):
        idx = self.bin_indices(X)
        bits = np.zeros((idx.shape[0], self.n_output_), dtype=np.uint8)
        rows = np.arange(idx.shape[0])[:, None]
        bits[rows, idx + self.offsets_] = 1
        return bits

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "edges_")
        names = []
        for feat, n in zip(self.feature_names_in_, self.n_bins_):
            names.extend(f"{feat}_bin{b}" for b in range(n))
        return np.asarray(names, dtype=object)

    def describe_bit(self, k, inverse=None):
        """``(feature, bin, low, high)`` for output bit ``k``.

        ``inverse`` optionally maps a feature index and a value back to raw
        units (e.g. undoing standardization).
        """
        check_is_fitted(self, "edges_")
        f = int(np.searchsorted(self.offsets_, k, side="right") - 1)
        b = int(k - self.offsets_[f])
        edges = self.edges_[f]
        low = edges[b - 1] if b > 0 else -np.inf
        high = edges[b] if b < len(edges) else np.inf
        if inverse is not None:
            low, high = inverse(f, low), inverse(f, high)
        return str(self.feature_names_in_[f]), b, float(low), float(high)

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        check_is_fitted(self, "edges_")
        return {
            "n_bins": int(self.n_bins),
            "features": [str(f) for f in self.feature_names_in_],
            "edges": [[float(v) for v in e] for e in self.edges_],
        }

    @classmethod
    def from_dict(cls, data):
        self = cls(n_bins=data["n_bins"])
        self.edges_ = [np.asarray(e, dtype=np.float64) for e in data["edges"]]
        self.n_features_in_ = len(self.edges_)
        self.feature_names_in_ = np.asarray(data["features"], dtype=object)
        self._offsets()
        return self

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))
