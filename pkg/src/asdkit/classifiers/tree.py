"""CART-style binary decision trees for binary classification.

Numeric splits at midpoints of sorted unique values; impurity is gini or
entropy; growth stops on purity, depth, or the sample constraints.  Split
ties break on the lowest feature index, then the lowest threshold, so the
tree is a pure function of its inputs.  The same builder serves the forest
(per-split feature subsampling) and accepts per-sample weights so the
boosting module can reuse it.
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import SeededRng
from .base import ModelSpec, TrainedModel, design_xy

__all__ = ["DecisionTreeModel", "train_decision_tree", "TreeNode", "build_tree"]


class TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "n0", "n1")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, n0=0, n1=0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.n0 = n0
        self.n1 = n1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def proba1(self) -> float:
        total = self.n0 + self.n1
        return self.n1 / total if total else 0.5

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"n0": self.n0, "n1": self.n1}
        return {
            "f": self.feature,
            "t": self.threshold,
            "n0": self.n0,
            "n1": self.n1,
            "l": self.left.to_dict(),
            "r": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "f" not in d:
            return cls(n0=d["n0"], n1=d["n1"])
        return cls(
            feature=d["f"],
            threshold=d["t"],
            left=cls.from_dict(d["l"]),
            right=cls.from_dict(d["r"]),
            n0=d["n0"],
            n1=d["n1"],
        )


def _impurity(p1: np.ndarray, criterion: str) -> np.ndarray:
    p1 = np.clip(p1, 0.0, 1.0)
    if criterion == "gini":
        return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
    # entropy in bits is conventional for information gain; base only
    # rescales, so nats are fine for argmax purposes
    p0 = 1.0 - p1
    out = np.zeros_like(p1)
    nz = p1 > 0
    out[nz] -= p1[nz] * np.log(p1[nz])
    nz = p0 > 0
    out[nz] -= p0[nz] * np.log(p0[nz])
    return out


def _best_split(X, y, w, idx, features, criterion, min_samples_leaf):
    """Scan candidate thresholds; returns (gain, feature, threshold)."""
    y_node = y[idx]
    w_node = w[idx]
    total_w = w_node.sum()
    total_w1 = float(w_node[y_node == 1].sum())
    parent = float(_impurity(np.array([total_w1 / total_w]), criterion)[0])
    best = (0.0, -1, 0.0)
    for f in features:
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        ys = y_node[order]
        ws = w_node[order]
        cw = np.cumsum(ws)
        cw1 = np.cumsum(ws * (ys == 1))
        n = len(idx)
        counts = np.arange(1, n + 1)
        # candidate boundaries sit between distinct neighbouring values
        boundary = np.flatnonzero(cs[1:] > cs[:-1])
        if len(boundary) == 0:
            continue
        ok = (counts[boundary] >= min_samples_leaf) & (
            n - counts[boundary] >= min_samples_leaf
        )
        boundary = boundary[ok]
        if len(boundary) == 0:
            continue
        wl = cw[boundary]
        wl1 = cw1[boundary]
        wr = total_w - wl
        wr1 = total_w1 - wl1
        imp_l = _impurity(wl1 / wl, criterion)
        imp_r = _impurity(wr1 / wr, criterion)
        gain = parent - (wl * imp_l + wr * imp_r) / total_w
        j = int(np.argmax(gain))
        g = float(gain[j])
        if g > best[0] + 1e-15:
            thr = 0.5 * (cs[boundary[j]] + cs[boundary[j] + 1])
            best = (g, f, float(thr))
    return best


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str = "gini",
    max_depth: int = 10**9,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    sample_weight: np.ndarray | None = None,
    max_features: int | None = None,
    rng: SeededRng | None = None,
) -> TreeNode:
    if criterion not in ("gini", "entropy"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if min(max_depth, min_samples_split, min_samples_leaf) < 1:
        raise ValueError("tree constraints must be positive")
    w = sample_weight if sample_weight is not None else np.ones(len(y))
    d = X.shape[1]

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        y_node = y[idx]
        n1 = int(np.sum(y_node == 1))
        node = TreeNode(n0=len(idx) - n1, n1=n1)
        if (
            depth >= max_depth
            or len(idx) < min_samples_split
            or n1 == 0
            or n1 == len(idx)
        ):
            return node
        if max_features is not None and max_features < d:
            features = np.sort(rng.choice_without_replacement(d, max_features))
        else:
            features = np.arange(d)
        gain, f, thr = _best_split(
            X, y, w, idx, features, criterion, min_samples_leaf
        )
        if f < 0:
            return node
        mask = X[idx, f] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        node.feature = f
        node.threshold = thr
        node.left = grow(left_idx, depth + 1)
        node.right = grow(right_idx, depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


def tree_proba1(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        node = root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        out[i] = node.proba1()
    return out


class DecisionTreeModel(TrainedModel):
    kind = "decision_tree"

    def __init__(self, spec, n_features, root: TreeNode):
        super().__init__(spec, n_features)
        self.root = root

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        return tree_proba1(self.root, X)

    def state_dict(self) -> dict:
        return {"tree": self.root.to_dict()}

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict):
        return cls(spec, n_features, TreeNode.from_dict(state["tree"]))


def train_decision_tree(
    m: DesignMatrix,
    criterion: str = "gini",
    max_depth: int = 10**9,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
) -> DecisionTreeModel:
    X, y = design_xy(m)
    root = build_tree(
        X,
        y,
        criterion=criterion,
        max_depth=max_depth,
        min_samples_split=min_samples_split,
        min_samples_leaf=min_samples_leaf,
    )
    spec = ModelSpec(
        "decision_tree",
        {
            "criterion": criterion,
            "max_depth": max_depth,
            "min_samples_split": min_samples_split,
            "min_samples_leaf": min_samples_leaf,
        },
    )
    return DecisionTreeModel(spec, m.x.cols, root)
