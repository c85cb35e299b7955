"""Cleaning, z-score standardization and SMOTE oversampling."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from sklearn.neighbors import NearestNeighbors
from sklearn.preprocessing import StandardScaler

from .exceptions import DataError, UsageError

log = logging.getLogger(__name__)


@dataclass
class FlowTable:
    """Numeric flow features with one class-name label per row."""

    columns: list
    values: np.ndarray
    labels: np.ndarray
    scenario: str = ""
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=object)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise DataError(
                f"value matrix shape {self.values.shape} does not match {len(self.columns)} columns"
            )
        if len(self.labels) != len(self.values):
            raise DataError("label column length differs from row count")

    def __len__(self):
        return len(self.values)

    def class_counts(self):
        names, counts = np.unique(self.labels.astype(str), return_counts=True)
        return dict(zip(names.tolist(), counts.tolist()))

    def take(self, idx):
        return replace(self, values=self.values[idx], labels=self.labels[idx], stats={})

    def to_frame(self, label_column="label"):
        df = pd.DataFrame(self.values, columns=self.columns)
        df[label_column] = self.labels
        return df

    @classmethod
    def from_frame(cls, df, label_column="label", scenario=""):
        cols = [c for c in df.columns if c != label_column]
        return cls(
            columns=cols,
            values=df[cols].to_numpy(dtype=np.float64),
            labels=df[label_column].astype(str).to_numpy(dtype=object),
            scenario=scenario,
        )

    # %.17g plus round-trip parsing keeps every double bit-exact through a file;
    # pandas' default parser can be off by an ulp, which moves values sitting
    # exactly on a quantile edge into the neighbouring bin
    def to_csv(self, path, label_column="label"):
        self.to_frame(label_column).to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path, label_column="label", scenario=""):
        return cls.from_frame(pd.read_csv(path, float_precision="round_trip"), label_column, scenario)


def clean(table: FlowTable) -> FlowTable:
    """Drop rows with missing or non-finite cells, then exact duplicates.

    Duplicates are keyed on the full (features, label) tuple; the first
    occurrence is kept and row order is otherwise preserved. Drop counts
    are recorded in ``stats``.
    """
    finite = np.isfinite(table.values).all(axis=1)
    finite &= pd.notna(table.labels)
    kept = table.take(np.flatnonzero(finite))
    df = kept.to_frame("__label__")
    dup = df.duplicated(keep="first").to_numpy()
    out = kept.take(np.flatnonzero(~dup))
    if len(out) == 0:
        raise DataError("cleaning removed every row")
    out.stats = {
        "rows_in": len(table),
        "dropped_missing": int((~finite).sum()),
        "dropped_duplicates": int(dup.sum()),
        "rows_out": len(out),
    }
    log.info("clean: %s", out.stats)
    return out


def fit_standardizer(train: FlowTable) -> StandardScaler:
    """Population mean/std per column; constant columns map to zero."""
    if len(train) == 0:
        raise UsageError("cannot fit a standardizer on an empty table")
    return StandardScaler().fit(train.values)


def apply_standardizer(stats: StandardScaler, table: FlowTable) -> FlowTable:
    return replace(table, values=stats.transform(table.values), stats=dict(table.stats))


def standardizer_to_dict(stats: StandardScaler):
    return {
        "mean": [float(v) for v in stats.mean_],
        "scale": [float(v) for v in stats.scale_],
        "var": [float(v) for v in stats.var_],
        "n_samples_seen": int(np.max(stats.n_samples_seen_)),
    }


def standardizer_from_dict(data) -> StandardScaler:
    sc = StandardScaler()
    sc.mean_ = np.asarray(data["mean"], dtype=np.float64)
    sc.scale_ = np.asarray(data["scale"], dtype=np.float64)
    sc.var_ = np.asarray(data["var"], dtype=np.float64)
    sc.n_samples_seen_ = np.int64(data["n_samples_seen"])
    sc.n_features_in_ = len(sc.mean_)
    return sc


def smote_arrays(X, y, k_neighbors=5, rng=None):
    """Oversample every class up to the majority count.

    Returns ``(X_res, y_res, origin)``: original rows first and unchanged,
    synthetic rows appended class by class. ``origin[i]`` is ``-1`` for
    synthetic rows and the source row index otherwise.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if k_neighbors < 1:
        raise UsageError("k_neighbors must be >= 1")
    rng = np.random.default_rng(rng)
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    small = classes[counts < 2]
    if len(small):
        raise DataError(f"SMOTE needs at least 2 samples per class; class {small[0]!r} has 1")
    new_X, new_y = [X], [y]
    for cls, n in zip(classes, counts):
        need = int(target - n)
        if need == 0:
            continue
        members = X[y == cls]
        k = int(k_neighbors)
        if k > n - 1:
            warnings.warn(f"class {cls!r}: k_neighbors={k} clipped to {n - 1}", stacklevel=2)
            k = n - 1
        nn = NearestNeighbors(n_neighbors=k + 1).fit(members)
        neigh = nn.kneighbors(members, return_distance=False)
        neigh = _drop_self(neigh, k)
        base = rng.integers(0, n, size=need)
        pick = neigh[base, rng.integers(0, k, size=need)]
        u = rng.random(need)[:, None]
        p, q = members[base], members[pick]
        new_X.append(p + u * (q - p))
        new_y.append(np.full(need, cls, dtype=y.dtype))
    origin = np.concatenate([np.arange(len(X)), np.full(sum(len(a) for a in new_X[1:]), -1)])
    return np.concatenate(new_X), np.concatenate(new_y), origin


def _drop_self(neigh, k):
    # with duplicate points the row itself is not always the first hit
    own = np.arange(len(neigh))[:, None]
    out = np.empty((len(neigh), k), dtype=np.int64)
    for i, row in enumerate(neigh):
        rest = row[row != own[i]]
        out[i] = rest[:k]
    return out


def smote(train: FlowTable, k_neighbors=5, rng=None) -> FlowTable:
    """SMOTE on a training table; see :func:`smote_arrays`."""
    before = train.class_counts()
    X, y, _ = smote_arrays(train.values, train.labels.astype(str), k_neighbors, rng)
    out = replace(train, values=X, labels=y.astype(object), stats=dict(train.stats))
    out.stats["smote_before"] = before
    out.stats["smote_after"] = out.class_counts()
    return out
