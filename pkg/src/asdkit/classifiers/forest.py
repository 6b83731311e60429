"""Random forest: bagged CART trees with per-split feature subsampling."""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import SeededRng
from .base import ModelSpec, TrainedModel, design_xy
from .tree import TreeNode, build_tree, tree_proba1

__all__ = ["RandomForestModel", "train_random_forest"]


def _resolve_max_features(option, d: int) -> int | None:
    if option in ("all", None):
        return None
    if option in ("sqrt", "auto"):  # 'auto' keeps its conventional meaning
        return max(1, int(np.sqrt(d)))
    if option == "log2":
        return max(1, int(np.log2(d))) if d > 1 else 1
    if isinstance(option, int):
        return max(1, min(option, d))
    raise ValueError(f"unknown max_features {option!r}")


class RandomForestModel(TrainedModel):
    kind = "random_forest"

    def __init__(self, spec, n_features, trees: list[TreeNode]):
        super().__init__(spec, n_features)
        self.trees = trees

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape[0])
        for t in self.trees:
            acc += tree_proba1(t, X)
        return acc / len(self.trees)

    def state_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict):
        return cls(spec, n_features, [TreeNode.from_dict(d) for d in state["trees"]])


def train_random_forest(
    m: DesignMatrix,
    n_estimators: int = 100,
    criterion: str = "gini",
    max_depth: int = 10**9,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_features: str | int | None = "sqrt",
    rng: SeededRng | None = None,
    bootstrap: bool = True,
) -> RandomForestModel:
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    rng = rng or SeededRng(0)
    X, y = design_xy(m)
    n, d = X.shape
    mf = _resolve_max_features(max_features, d)
    trees = []
    for t in range(n_estimators):
        tree_rng = rng.split(t)
        if bootstrap:
            idx = np.array([tree_rng.randint(n) for _ in range(n)])
            Xt, yt = X[idx], y[idx]
        else:
            Xt, yt = X, y
        trees.append(
            build_tree(
                Xt,
                yt,
                criterion=criterion,
                max_depth=max_depth,
                min_samples_split=min_samples_split,
                min_samples_leaf=min_samples_leaf,
                max_features=mf,
                rng=tree_rng,
            )
        )
    spec = ModelSpec(
        "random_forest",
        {
            "n_estimators": n_estimators,
            "criterion": criterion,
            "max_depth": max_depth,
            "min_samples_split": min_samples_split,
            "min_samples_leaf": min_samples_leaf,
            "max_features": max_features if isinstance(max_features, (str, int)) else "all",
            "bootstrap": bootstrap,
        },
    )
    return RandomForestModel(spec, m.x.cols, trees)
