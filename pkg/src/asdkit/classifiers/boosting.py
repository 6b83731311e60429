"""Gradient-boosted trees on logistic loss with second-order leaf weights.

The model is additive: the margin of a row is the base score plus the sum of
the leaf weights its features select in each round's tree.  Every round fits
a regression tree to the current gradient/hessian statistics; a leaf's
weight is -G/(H + lambda) and a split's quality is the standard
second-order gain.  Probability is the sigmoid of the summed margin.
Defaults lambda=1, gamma=0 are recorded with the model parameters.
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from .base import ModelSpec, TrainedModel, TrainLog, design_xy

__all__ = ["GradientBoostModel", "train_gradient_boost"]

LAMBDA = 1.0
GAMMA = 0.0


class _BoostNode:
    __slots__ = ("feature", "threshold", "left", "right", "weight")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, weight=0.0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.weight = weight

    @property
    def is_leaf(self):
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"w": self.weight}
        return {
            "f": self.feature,
            "t": self.threshold,
            "l": self.left.to_dict(),
            "r": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_BoostNode":
        if "f" not in d:
            return cls(weight=d["w"])
        return cls(d["f"], d["t"], cls.from_dict(d["l"]), cls.from_dict(d["r"]))


def _leaf_weight(G: float, H: float) -> float:
    return -G / (H + LAMBDA)


def _score(G: float, H: float) -> float:
    return G * G / (H + LAMBDA)


def _build_boost_tree(X, g, h, idx, depth, max_depth) -> _BoostNode:
    G = float(g[idx].sum())
    H = float(h[idx].sum())
    node = _BoostNode(weight=_leaf_weight(G, H))
    if depth >= max_depth or len(idx) < 2:
        return node
    best_gain = 0.0
    best = None
    parent_score = _score(G, H)
    for f in range(X.shape[1]):
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        cg = np.cumsum(g[idx][order])
        ch = np.cumsum(h[idx][order])
        boundary = np.flatnonzero(cs[1:] > cs[:-1])
        if len(boundary) == 0:
            continue
        GL = cg[boundary]
        HL = ch[boundary]
        GR = G - GL
        HR = H - HL
        gain = 0.5 * (
            GL * GL / (HL + LAMBDA) + GR * GR / (HR + LAMBDA) - parent_score
        ) - GAMMA
        j = int(np.argmax(gain))
        if gain[j] > best_gain + 1e-15:
            best_gain = float(gain[j])
            best = (f, 0.5 * (cs[boundary[j]] + cs[boundary[j] + 1]))
    if best is None:
        return node
    f, thr = best
    mask = X[idx, f] <= thr
    node.feature = f
    node.threshold = float(thr)
    node.left = _build_boost_tree(X, g, h, idx[mask], depth + 1, max_depth)
    node.right = _build_boost_tree(X, g, h, idx[~mask], depth + 1, max_depth)
    return node


def _tree_margins(root: _BoostNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        node = root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        out[i] = node.weight
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


class GradientBoostModel(TrainedModel):
    kind = "gradient_boost"

    def __init__(self, spec, n_features, base_score, trees, train_log=None):
        super().__init__(spec, n_features, train_log)
        self.base_score = base_score  # margin prior to any tree
        self.trees = trees

    def margins(self, X: np.ndarray) -> np.ndarray:
        z = np.full(X.shape[0], self.base_score)
        lr = self.spec.params["learning_rate"]
        for t in self.trees:
            z += lr * _tree_margins(t, X)
        return z

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.margins(X))

    def state_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "lambda": LAMBDA,
            "gamma": GAMMA,
        }

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict):
        return cls(
            spec,
            n_features,
            float(state["base_score"]),
            [_BoostNode.from_dict(d) for d in state["trees"]],
        )


def train_gradient_boost(
    m: DesignMatrix,
    n_estimators: int = 100,
    max_depth: int = 3,
    learning_rate: float = 0.1,
) -> GradientBoostModel:
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    X, y = design_xy(m)
    pos = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    base = float(np.log(pos / (1.0 - pos)))
    z = np.full(len(y), base)
    log = TrainLog()
    log.record(_logloss(y, _sigmoid(z)))
    trees = []
    idx_all = np.arange(len(y))
    for _ in range(n_estimators):
        p = _sigmoid(z)
        g = p - y
        h = np.maximum(p * (1.0 - p), 1e-16)
        tree = _build_boost_tree(X, g, h, idx_all, 0, max_depth)
        trees.append(tree)
        z = z + learning_rate * _tree_margins(tree, X)
        log.record(_logloss(y, _sigmoid(z)))
    log.epochs = n_estimators
    spec = ModelSpec(
        "gradient_boost",
        {
            "n_estimators": n_estimators,
            "max_depth": max_depth,
            "learning_rate": learning_rate,
            "lambda": LAMBDA,
            "gamma": GAMMA,
        },
    )
    return GradientBoostModel(spec, m.x.cols, base, trees, log)
