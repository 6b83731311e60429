"""k-nearest neighbours with brute-force Euclidean search.

``leaf_size`` is accepted for hyperparameter-grid fidelity but has no effect
on brute-force search; behaviour must not depend on it.  Zero-distance
neighbours dominate an inverse-distance vote.
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import Matrix
from .base import ModelSpec, TrainedModel, design_xy

__all__ = ["KnnModel", "train_knn"]


class KnnModel(TrainedModel):
    kind = "knn"

    def __init__(self, spec, n_features, X, y):
        super().__init__(spec, n_features)
        self.X = X
        self.y = y

    def _proba1(self, Q: np.ndarray) -> np.ndarray:
        k = self.spec.params["n_neighbors"]
        weights = self.spec.params["weights"]
        sq_train = np.sum(self.X * self.X, axis=1)
        out = np.empty(Q.shape[0])
        for i, q in enumerate(Q):
            d2 = sq_train - 2.0 * (self.X @ q) + q @ q
            np.maximum(d2, 0.0, out=d2)
            idx = np.argsort(d2, kind="stable")[:k]
            labels = self.y[idx]
            if weights == "uniform":
                out[i] = labels.mean()
            else:
                d = np.sqrt(d2[idx])
                zero = d <= 0.0
                if zero.any():
                    out[i] = labels[zero].mean()
                else:
                    w = 1.0 / d
                    out[i] = float(w[labels == 1].sum() / w.sum())
        return out

    def state_dict(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict) -> "KnnModel":
        return cls(
            spec, n_features, np.array(state["X"], dtype=np.float64), np.array(state["y"])
        )


def train_knn(
    m: DesignMatrix,
    n_neighbors: int = 5,
    weights: str = "uniform",
    leaf_size: int = 30,
    algorithm: str = "brute",
) -> KnnModel:
    if weights not in ("uniform", "distance"):
        raise ValueError(f"unknown weights {weights!r}")
    X, y = design_xy(m)
    if n_neighbors < 1 or n_neighbors > len(y):
        raise ValueError(
            f"n_neighbors must be in 1..{len(y)} (got {n_neighbors})"
        )
    spec = ModelSpec(
        "knn",
        {
            "n_neighbors": int(n_neighbors),
            "weights": weights,
            "leaf_size": int(leaf_size),
            "algorithm": algorithm,
        },
    )
    return KnnModel(spec, m.x.cols, X.copy(), y.copy())
