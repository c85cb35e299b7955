"""Flow-feature intrusion detector: standardize, SMOTE, binarize, Tsetlin Machine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_array, check_is_fitted

from .binarizer import QuantileBinarizer
from .preprocess import smote_arrays
from .tsetlin import TsetlinMachineClassifier

# Table V / VII / X settings per scenario
SCENARIO_PARAMS = {
    "S1": {"n_clauses": 100, "T": 10, "s": 2.0, "epochs": 10},
    "S2": {"n_clauses": 100, "T": 10, "s": 5.0, "epochs": 15},
    "S3": {"n_clauses": 120, "T": 15, "s": 2.0, "epochs": 15},
}


class TsetlinIDS(ClassifierMixin, BaseEstimator):
    """Raw flow features in, class indices out.

    ``fit`` standardizes with training statistics, balances the training
    set with SMOTE in standardized space, fits quantile bins on the
    balanced set and trains the Tsetlin Machine on the resulting bits.
    ``predict`` only applies the fitted transforms; it never resamples.
    """

    def __init__(
        self,
        n_clauses=100,
        T=10,
        s=2.0,
        epochs=10,
        n_bins=5,
        states_per_action=128,
        clause_budget="per_class",
        smote=True,
        smote_k=5,
        n_classes=None,
        random_state=0,
    ):
        self.n_clauses = n_clauses
        self.T = T
        self.s = s
        self.epochs = epochs
        self.n_bins = n_bins
        self.states_per_action = states_per_action
        self.clause_budget = clause_budget
        self.smote = smote
        self.smote_k = smote_k
        self.n_classes = n_classes
        self.random_state = random_state

    def _tm(self):
        return TsetlinMachineClassifier(
            n_clauses=self.n_clauses,
            T=self.T,
            s=self.s,
            epochs=self.epochs,
            states_per_action=self.states_per_action,
            clause_budget=self.clause_budget,
            n_classes=self.n_classes,
            random_state=self.random_state,
        )

    def fit(self, X, y, X_val=None, y_val=None, feature_names=None):
        if feature_names is None and hasattr(X, "columns"):
            feature_names = [str(c) for c in X.columns]
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        self.scaler_ = StandardScaler().fit(X)
        Xs = self.scaler_.transform(X)
        if self.smote:
            seed = np.random.SeedSequence([int(self.random_state or 0), 0x5307E])
            Xs, y, _ = smote_arrays(Xs, y, self.smote_k, np.random.default_rng(seed))
        self.binarizer_ = QuantileBinarizer(self.n_bins).fit(Xs, feature_names=feature_names)
        bits = self.binarizer_.transform(Xs)
        val = {}
        if X_val is not None:
            Xv = self.scaler_.transform(check_array(X_val, dtype=np.float64))
            val = {"X_val": self.binarizer_.transform(Xv), "y_val": y_val}
        self.tm_ = self._tm().fit(bits, y, feature_names=list(self.binarizer_.get_feature_names_out()), **val)
        self.classes_ = self.tm_.classes_
        self.n_features_in_ = X.shape[1]
        self.n_train_resampled_ = len(bits)
        return self

    @classmethod
    def from_parts(cls, scaler, binarizer, tm, **params):
        self = cls(**params)
        self.scaler_ = scaler
        self.binarizer_ = binarizer
        self.tm_ = tm
        self.classes_ = tm.classes_
        self.n_features_in_ = binarizer.n_features_in_
        return self

    def transform(self, X):
        """Raw features to the binary literal vector the TM consumes."""
        check_is_fitted(self, "tm_")
        X = check_array(X, dtype=np.float64)
        return self.binarizer_.transform(self.scaler_.transform(X))

    def predict(self, X):
        return self.tm_.predict(self.transform(X))

    def decision_function(self, X):
        return self.tm_.decision_function(self.transform(X))

    def raw_edge(self, feature, value):
        """Map a standardized bin edge back to raw feature units."""
        if not np.isfinite(value):
            return value
        return float(value * self.scaler_.scale_[feature] + self.scaler_.mean_[feature])
