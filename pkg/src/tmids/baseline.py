import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted


class MajorityClassifier(ClassifierMixin, BaseEstimator):
    """Always predicts the most frequent training label (lowest label on ties)."""

    def fit(self, X, y):
        y = np.asarray(y)
        if y.size == 0:
            raise ValueError("cannot fit on empty labels")
        self.classes_, counts = np.unique(y, return_counts=True)
        self.majority_ = self.classes_[np.argmax(counts)]
        return self

    def predict(self, X):
        check_is_fitted(self, "majority_")
        return np.full(len(X), self.majority_)
