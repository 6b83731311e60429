"""Gaussian naive Bayes with a variance floor.

Class-conditional per-feature Gaussians; the floor added to every variance
is ``var_smoothing`` times the largest per-feature variance of the training
data, so heavily smoothed settings wash individual features out instead of
producing degenerate spikes.
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import Matrix
from .base import ModelSpec, TrainedModel, design_xy, require_both_classes

__all__ = ["NaiveBayesModel", "train_naive_bayes"]


class NaiveBayesModel(TrainedModel):
    kind = "naive_bayes"

    def __init__(self, spec, n_features, priors, means, variances):
        super().__init__(spec, n_features)
        self.priors = priors  # shape (2,)
        self.means = means  # shape (2, d)
        self.variances = variances  # shape (2, d), floored

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        log_post = np.empty((X.shape[0], 2))
        for c in (0, 1):
            diff = X - self.means[c]
            ll = -0.5 * np.sum(
                np.log(2.0 * np.pi * self.variances[c]) + diff * diff / self.variances[c],
                axis=1,
            )
            log_post[:, c] = np.log(self.priors[c]) + ll
        # normalise in log space
        m = log_post.max(axis=1, keepdims=True)
        p = np.exp(log_post - m)
        p /= p.sum(axis=1, keepdims=True)
        return p[:, 1]

    def state_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict) -> "NaiveBayesModel":
        return cls(
            spec,
            n_features,
            np.array(state["priors"]),
            np.array(state["means"]),
            np.array(state["variances"]),
        )


def train_naive_bayes(m: DesignMatrix, var_smoothing: float = 1e-9) -> NaiveBayesModel:
    if var_smoothing < 0:
        raise ValueError("var_smoothing must be >= 0")
    X, y = design_xy(m)
    require_both_classes(y, "naive_bayes")
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)])
    floor = var_smoothing * float(X.var(axis=0).max())
    variances = variances + max(floor, 1e-12)
    spec = ModelSpec("naive_bayes", {"var_smoothing": var_smoothing})
    return NaiveBayesModel(spec, m.x.cols, priors, means, variances)
