"""Confusion matrices, accuracy/precision/recall/F1, cross-validation and latency."""

from __future__ import annotations

import json
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import clone
from sklearn.model_selection import StratifiedKFold

from .exceptions import DataError, UsageError


def confusion_matrix(y_true, y_pred, n_classes=None):
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if n_classes is None:
        n_classes = int(max(y_true.max(initial=0), y_pred.max(initial=0))) + 1
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_ratio(num, den, what, cls):
    if den == 0:
        warnings.warn(f"{what} undefined for class {cls} (zero denominator); set to 0", stacklevel=3)
        return 0.0
    return num / den


def _f1(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class EvalReport:
    """Evaluation results. Fractions are in [0, 1]; latency is in microseconds."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    average: str
    confusion_matrix: list
    class_names: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)
    fold_summary: dict = field(default_factory=dict)
    latency: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table_row(self, model="TM"):
        row = {
            "Model": model,
            "Accuracy": self.accuracy,
            "Precision": self.precision,
            "Recall": self.recall,
            "F1-score": self.f1,
        }
        if self.latency:
            row["Inference time (us)"] = self.latency.get("mean_us")
        return row


def compute_metrics(cm, average="macro", class_names=None, positive=1) -> EvalReport:
    """Accuracy, precision, recall and F1 from a confusion matrix.

    With two classes the scores are those of the ``positive`` (attack)
    class whatever ``average`` says. With more, each class is scored
    one-vs-rest and the scores are averaged: ``"macro"`` (unweighted) or
    ``"weighted"`` (by true count).
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total <= 0:
        raise UsageError("confusion matrix is empty")
    if average not in ("macro", "weighted", "binary"):
        raise UsageError(f"unknown averaging mode {average!r}")
    C = cm.shape[0]
    names = list(class_names) if class_names is not None else [str(i) for i in range(C)]
    accuracy = float(np.trace(cm) / total)
    per_class = {}
    for c in range(C):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum() - tp)
        fn = int(cm[c, :].sum() - tp)
        tn = int(total - tp - fp - fn)
        with warnings.catch_warnings():
            if C == 2 and c != positive:
                warnings.simplefilter("ignore")
            p = _safe_ratio(tp, tp + fp, "precision", names[c])
            r = _safe_ratio(tp, tp + fn, "recall", names[c])
        per_class[names[c]] = {
            "tp": tp, "fp": fp, "fn": fn, "tn": tn,
            "precision": p, "recall": r, "f1": _f1(p, r),
            "support": tp + fn,
        }
    if C == 2:
        # attack-vs-benign: always the positive class's own scores
        pos = per_class[names[positive]]
        p, r, f = pos["precision"], pos["recall"], pos["f1"]
        average = "binary"
    else:
        stats = list(per_class.values())
        table = {k: np.array([s[k] for s in stats]) for k in ("precision", "recall", "f1")}
        if average == "weighted":
            w = np.array([s["support"] for s in stats], dtype=np.float64)
            p, r, f = (float(np.average(table[k], weights=w)) for k in ("precision", "recall", "f1"))
        else:
            p, r, f = (float(np.mean(table[k])) for k in ("precision", "recall", "f1"))
    return EvalReport(
        accuracy=accuracy,
        precision=float(p),
        recall=float(r),
        f1=float(f),
        average=average,
        confusion_matrix=cm.tolist(),
        class_names=names,
        per_class=per_class,
    )


def evaluate(y_true, y_pred, n_classes, average="macro", class_names=None) -> EvalReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return compute_metrics(confusion_matrix(y_true, y_pred, n_classes), average, class_names)


def stratified_folds(y, k=5, seed=0):
    """List of ``(train_idx, val_idx)`` pairs; every sample validates exactly once."""
    y = np.asarray(y)
    if k < 2:
        raise UsageError("k must be at least 2")
    classes, counts = np.unique(y, return_counts=True)
    small = classes[counts < k]
    if len(small):
        raise DataError(f"class {small[0]!r} has fewer than k={k} samples")
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed % (2**32))
    return list(skf.split(np.zeros(len(y)), y))


def kfold_cv(estimator, X, y, k=5, seed=0, average="macro", class_names=None, n_classes=None):
    """Stratified k-fold cross-validation.

    ``estimator`` is cloned per fold and fit on the other ``k - 1`` folds
    only, so any resampling or scaling it does never sees the validation
    fold. Returns an :class:`EvalReport` over the pooled out-of-fold
    predictions with per-fold reports and mean/std in ``fold_summary``.
    """
    y = np.asarray(y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    folds = stratified_folds(y, k, seed)
    pred = np.empty_like(y)
    per_fold = []
    for i, (tr, va) in enumerate(folds):
        est = clone(estimator)
        est.fit(X[tr], y[tr])
        pred[va] = est.predict(X[va])
        rep = evaluate(y[va], pred[va], n_classes, average, class_names)
        per_fold.append({
            "fold": i,
            "n_train": int(len(tr)),
            "n_val": int(len(va)),
            "accuracy": rep.accuracy,
            "precision": rep.precision,
            "recall": rep.recall,
            "f1": rep.f1,
        })
    report = evaluate(y, pred, n_classes, average, class_names)
    report.folds = per_fold
    report.fold_summary = {
        key: {
            "mean": float(np.mean([f[key] for f in per_fold])),
            "std": float(np.std([f[key] for f in per_fold])),
        }
        for key in ("accuracy", "precision", "recall", "f1")
    }
    return report


def cpu_name():
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def measure_latency(predict_one, samples, repetitions=1, warmup=50):
    """Wall-clock per-call latency of ``predict_one(sample)`` in microseconds.

    The first ``warmup`` calls are not timed. At least 100 calls are timed.
    """
    samples = list(samples)
    if not samples:
        raise UsageError("no samples to time")
    n_timed = len(samples) * int(repetitions)
    if n_timed < 100:
        raise UsageError(f"need at least 100 timed predictions, got {n_timed}")
    for i in range(warmup):
        predict_one(samples[i % len(samples)])
    clock = time.perf_counter_ns
    times = np.empty(n_timed, dtype=np.int64)
    t = 0
    for _ in range(int(repetitions)):
        for x in samples:
            t0 = clock()
            predict_one(x)
            times[t] = clock() - t0
            t += 1
    us = times / 1000.0
    return {
        "n": int(n_timed),
        "mean_us": float(us.mean()),
        "p50_us": float(np.percentile(us, 50)),
        "p99_us": float(np.percentile(us, 99)),
        "cpu": cpu_name(),
        "python": platform.python_version(),
    }
