"""Multi-class Tsetlin Machine classifier.

Each class owns ``m`` conjunctive clauses, the first half voting for the
class and the second half against it. Every literal of every clause is
governed by a two-action Tsetlin automaton with ``2N`` states.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import _kernels as K
from .exceptions import DimensionError, UsageError

INFERENCE = "inference"
LEARNING = "learning"


@dataclass(frozen=True)
class Clause:
    """A read-only view of one clause.

    ``automata`` holds ``2d`` states; the first ``d`` govern the plain
    literals ``x_i`` and the last ``d`` the negated literals ``NOT x_i``.
    """

    automata: np.ndarray
    polarity: int
    class_id: int
    states_per_action: int = 128

    @property
    def n_features(self) -> int:
        return self.automata.shape[0] // 2

    @property
    def included(self) -> np.ndarray:
        d = self.n_features
        return np.flatnonzero(self.automata[:d] > self.states_per_action)

    @property
    def negated(self) -> np.ndarray:
        d = self.n_features
        return np.flatnonzero(self.automata[d:] > self.states_per_action)

    @property
    def is_empty(self) -> bool:
        return not np.any(self.automata > self.states_per_action)


def evaluate_clause(clause: Clause, x, mode: str = INFERENCE) -> int:
    """Output of ``clause`` on the binary sample ``x``.

    An empty clause outputs 1 in learning mode and 0 in inference mode.
    """
    x = np.asarray(x)
    if clause.automata.shape[0] != 2 * x.shape[0]:
        raise DimensionError(
            f"sample has {x.shape[0]} bits, clause expects {clause.n_features}"
        )
    if mode not in (INFERENCE, LEARNING):
        raise UsageError(f"unknown mode {mode!r}")
    if clause.is_empty:
        return 1 if mode == LEARNING else 0
    if np.any(x[clause.included] != 1):
        return 0
    if np.any(x[clause.negated] != 0):
        return 0
    return 1


def check_binary(X, *, ensure_2d=True):
    X = check_array(X, dtype=None, ensure_2d=ensure_2d)
    if X.dtype != np.uint8:
        if not np.all((X == 0) | (X == 1)):
            raise ValueError("Tsetlin Machine input must be binary (0/1)")
        X = X.astype(np.uint8)
    elif X.size and X.max() > 1:
        raise ValueError("Tsetlin Machine input must be binary (0/1)")
    return np.ascontiguousarray(X)


class TsetlinMachineClassifier(ClassifierMixin, BaseEstimator):
    """Multi-class Tsetlin Machine with unweighted clauses.

    Parameters
    ----------
    n_clauses : int, default=100
        Clause budget. Interpreted per class, or split across classes when
        ``clause_budget="total"``. Must be even per class.
    T : int, default=10
        Vote threshold; class sums are clamped to ``[-T, T]`` for feedback.
    s : float, default=2.0
        Specificity, ``s > 1``.
    epochs : int, default=10
    states_per_action : int, default=128
        ``N``; each automaton has ``2N`` states.
    clause_budget : {"per_class", "total"}, default="per_class"
    shuffle : bool, default=True
        Reshuffle sample order every epoch with the model's own RNG.
    n_classes : int or None
        Fix the label space to ``range(n_classes)``. Otherwise the sorted
        unique training labels are used.
    random_state : int or None, default=0
        64-bit seed. ``None`` draws a fresh seed, recorded in ``seed_``.
    """

    def __init__(
        self,
        n_clauses=100,
        T=10,
        s=2.0,
        epochs=10,
        states_per_action=128,
        clause_budget="per_class",
        shuffle=True,
        n_classes=None,
        random_state=0,
    ):
        self.n_clauses = n_clauses
        self.T = T
        self.s = s
        self.epochs = epochs
        self.states_per_action = states_per_action
        self.clause_budget = clause_budget
        self.shuffle = shuffle
        self.n_classes = n_classes
        self.random_state = random_state

    # -- setup ---------------------------------------------------------------

    def _check_params(self):
        if int(self.T) != self.T or self.T < 1:
            raise UsageError(f"T must be a positive integer, got {self.T}")
        if not self.s > 1:
            raise UsageError(f"s must be > 1, got {self.s}")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise UsageError(f"epochs must be a non-negative integer, got {self.epochs}")
        if not 1 <= self.states_per_action <= 128:
            # states are persisted as one byte each (state - 1)
            raise UsageError("states_per_action must be in [1, 128]")
        if self.clause_budget not in ("per_class", "total"):
            raise UsageError(f"unknown clause_budget {self.clause_budget!r}")
        if self.n_clauses < 2:
            raise UsageError("n_clauses must be at least 2")

    def _clauses_per_class(self, n_classes):
        m = self.n_clauses
        if self.clause_budget == "total":
            m = (m // n_classes) // 2 * 2
        if m < 2 or m % 2:
            raise UsageError(
                f"clauses per class must be even and >= 2, got {m} "
                f"(n_clauses={self.n_clauses}, budget={self.clause_budget})"
            )
        return m

    def _encode_labels(self, y):
        y = np.asarray(y)
        if self.n_classes is not None:
            classes = np.arange(self.n_classes)
        else:
            classes = np.unique(y)
        idx = np.searchsorted(classes, y)
        idx = np.clip(idx, 0, len(classes) - 1)
        if not np.array_equal(classes[idx], y):
            bad = sorted(set(np.asarray(y).tolist()) - set(classes.tolist()))
            raise ValueError(f"labels outside the class range: {bad[:5]}")
        return classes, idx.astype(np.int64)

    def _initialize(self, n_features, classes, feature_names=None):
        self._check_params()
        if len(classes) < 2:
            raise ValueError("need at least two classes")
        self.classes_ = classes
        self.n_features_in_ = n_features
        m = self._clauses_per_class(len(classes))
        self.clauses_per_class_ = m
        N = int(self.states_per_action)
        # every automaton starts at N: the exclude state next to the boundary
        self.states_ = np.full((len(classes), m, 2 * n_features), N, dtype=np.int16)
        seed = self.random_state
        if seed is None:
            seed = secrets.randbits(64)
        self.seed_ = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.rng_state_ = K.seed_state(np.uint64(self.seed_))
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(n_features)]
        if len(feature_names) != n_features:
            raise DimensionError("feature_names length does not match X")
        self.feature_names_ = list(feature_names)
        self.trace_ = []
        self.clause_fire_freq_ = np.zeros((len(classes), m))
        self._refresh()

    def _refresh(self):
        self._masks, self._nonempty = K.pack_masks(self.states_, self.states_per_action)

    # -- training ------------------------------------------------------------

    def fit(self, X, y, X_val=None, y_val=None, feature_names=None):
        """Train from scratch for ``epochs`` passes.

        Per-epoch accuracies land in ``trace_``; pass ``X_val``/``y_val``
        to also track held-out accuracy.
        """
        if len(X) == 0:
            raise UsageError("cannot fit on an empty dataset")
        X = check_binary(X)
        if len(y) != len(X):
            raise ValueError("X and y have different lengths")
        if feature_names is None and hasattr(X, "columns"):
            feature_names = list(X.columns)
        classes, yi = self._encode_labels(y)
        self._initialize(X.shape[1], classes, feature_names)
        val = None
        if X_val is not None:
            val = (check_binary(X_val), np.asarray(y_val))
        for _ in range(int(self.epochs)):
            self._run_epoch(X, yi, val)
        self._update_fire_freq(X)
        return self

    def partial_fit(self, X, y, classes=None):
        """Run one more epoch, initializing on the first call."""
        X = check_binary(X)
        if not hasattr(self, "states_"):
            if classes is None and self.n_classes is None:
                classes = np.unique(y)
            elif classes is None:
                classes = np.arange(self.n_classes)
            self._initialize(X.shape[1], np.asarray(classes))
        self._check_width(X)
        yi = self._label_index(y)
        self._run_epoch(X, yi, None)
        self._update_fire_freq(X)
        return self

    def train_step(self, x, y):
        """Feedback for a single sample; returns the sampled negative class index."""
        check_is_fitted(self, "states_")
        x = check_binary(np.asarray(x).reshape(1, -1))[0]
        self._check_width(x.reshape(1, -1))
        yi = int(self._label_index([y])[0])
        q = K.train_sample(
            self.states_, x, yi, int(self.T), float(self.s), int(self.states_per_action), self.rng_state_
        )
        self._refresh()
        return int(q)

    def _run_epoch(self, X, yi, val):
        K.train_epoch(
            self.states_,
            X,
            yi,
            int(self.T),
            float(self.s),
            int(self.states_per_action),
            bool(self.shuffle),
            self.rng_state_,
        )
        self._refresh()
        row = {
            "epoch": len(self.trace_) + 1,
            "train_accuracy": float(np.mean(self._predict_index(X) == yi)),
        }
        if val is not None:
            Xv, yv = val
            row["val_accuracy"] = float(np.mean(self.predict(Xv) == yv))
        self.trace_.append(row)

    def _update_fire_freq(self, X):
        counts = K.clause_fire_counts(self._masks, self._nonempty, X)
        self.clause_fire_freq_ = counts / max(len(X), 1)

    # -- inference -----------------------------------------------------------

    def _label_index(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if not np.array_equal(self.classes_[idx], y):
            raise ValueError("labels outside the fitted class range")
        return idx.astype(np.int64)

    def _check_width(self, X):
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"X has {X.shape[1]} bits, model was built for {self.n_features_in_}"
            )

    def _prepare(self, X):
        check_is_fitted(self, "states_")
        X = check_binary(X)
        self._check_width(X)
        return X

    def decision_function(self, X):
        """Unclamped class votes ``f_c(x)``, shape ``(n_samples, n_classes)``."""
        X = self._prepare(X)
        return K.class_votes(self._masks, self._nonempty, X)

    class_votes = decision_function

    def _predict_index(self, X):
        votes = K.class_votes(self._masks, self._nonempty, X)
        # np.argmax returns the first maximum: ties go to the lowest index
        return np.argmax(votes, axis=1)

    def predict(self, X):
        X = self._prepare(X)
        return self.classes_[self._predict_index(X)]

    def predict_one(self, x):
        """Fast single-sample path; ``x`` must already be a uint8 0/1 vector."""
        return self.classes_[K.predict_one(self._masks, self._nonempty, x)]

    def clause_outputs(self, X):
        """Inference-mode clause outputs, shape ``(n_samples, n_classes, m)``."""
        X = self._prepare(X)
        return K.clause_outputs(self._masks, self._nonempty, X)

    # -- introspection -------------------------------------------------------

    @property
    def polarity_(self):
        m = self.clauses_per_class_
        return np.concatenate([np.ones(m // 2, dtype=np.int8), -np.ones(m // 2, dtype=np.int8)])

    def clause(self, class_id, j) -> Clause:
        check_is_fitted(self, "states_")
        return Clause(
            automata=self.states_[class_id, j].copy(),
            polarity=int(self.polarity_[j]),
            class_id=int(class_id),
            states_per_action=int(self.states_per_action),
        )

    def include_mask(self):
        """Boolean include decisions, shape ``(n_classes, m, 2d)``."""
        check_is_fitted(self, "states_")
        return self.states_ > self.states_per_action

    def set_states(self, states):
        """Replace every automaton state (used by model loading and tests)."""
        check_is_fitted(self, "states_")
        states = np.asarray(states, dtype=np.int16)
        if states.shape != self.states_.shape:
            raise DimensionError(f"states shape {states.shape} != {self.states_.shape}")
        N = self.states_per_action
        if states.min() < 1 or states.max() > 2 * N:
            raise ValueError(f"automaton states must lie in [1, {2 * N}]")
        self.states_ = np.ascontiguousarray(states)
        self._refresh()
        return self

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_masks", None)
        state.pop("_nonempty", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        if "states_" in state:
            self._refresh()


def build_empty(n_features, n_classes, **params) -> TsetlinMachineClassifier:
    """An initialized, untrained model (all literals excluded)."""
    tm = TsetlinMachineClassifier(n_classes=n_classes, **params)
    tm._initialize(n_features, np.arange(n_classes))
    return tm
