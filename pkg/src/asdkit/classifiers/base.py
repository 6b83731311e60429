"""Shared train/predict contract for the eight supervised models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import Matrix

__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "TrainLog",
    "TrainedModel",
    "clip_proba",
]

MODEL_KINDS = (
    "naive_bayes",
    "knn",
    "svm",
    "decision_tree",
    "random_forest",
    "gradient_boost",
    "logistic_regression",
    "ann",
)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass
class TrainLog:
    """Per-iteration objective trace for the iterative trainers."""

    objectives: list[float] = field(default_factory=list)
    epochs: int = 0
    final_loss: float = float("nan")

    def record(self, value: float) -> None:
        v = float(value)
        if not np.isfinite(v):
            raise RuntimeError(f"training objective became non-finite: {v}")
        self.objectives.append(v)
        self.final_loss = v


def clip_proba(p1: np.ndarray) -> np.ndarray:
    """Two-column probability matrix from class-1 probabilities.

    Both columns are clipped to [1e-15, 1-1e-15] so downstream log loss is
    finite; rows still sum to 1 within 1e-9.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    out = np.column_stack([1.0 - p1, p1])
    return np.clip(out, 1e-15, 1.0 - 1e-15)


class TrainedModel:
    """Base for the fitted models: one predict / predict_proba contract.

    Subclasses implement `_proba1(X)` returning class-1 probabilities and a
    `state_dict()` / `from_state` pair for JSON serialization.
    """

    kind: str = ""

    def __init__(self, spec: ModelSpec, n_features: int, train_log: TrainLog | None = None):
        self.spec = spec
        self.n_features = n_features
        self.train_log = train_log or TrainLog()

    def _check(self, x: Matrix) -> np.ndarray:
        if x.cols != self.n_features:
            raise ValueError(
                f"feature count mismatch: model has {self.n_features}, input {x.cols}"
            )
        return x.a

    def predict_proba(self, x: Matrix) -> np.ndarray:
        X = self._check(x)
        return clip_proba(self._proba1(X))

    def predict(self, x: Matrix) -> np.ndarray:
        """Class labels; probability-of-ASD >= 0.5 maps to 1 (screening-
        conservative tie rule)."""
        proba = self.predict_proba(x)
        return (proba[:, 1] >= 0.5).astype(np.int64)

    def _proba1(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    # --- serialization -------------------------------------------------
    def state_dict(self) -> dict:  # pragma: no cover
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        return {
            "format": "asdkit-model/1",
            "kind": self.kind,
            "params": dict(self.spec.params),
            "n_features": self.n_features,
            "state": self.state_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def require_both_classes(y: np.ndarray, kind: str) -> None:
    if len(np.unique(y)) < 2:
        raise ValueError(f"{kind}: training data contains a single class")


def design_xy(m: DesignMatrix) -> tuple[np.ndarray, np.ndarray]:
    return m.x.a, m.y
