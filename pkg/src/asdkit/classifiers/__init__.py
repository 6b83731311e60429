"""The eight supervised models behind one train/predict contract."""

from __future__ import annotations

from ..dataset import DesignMatrix
from ..numerics import SeededRng
from .ann import AnnModel, train_ann
from .base import MODEL_KINDS, ModelSpec, TrainLog, TrainedModel
from .boosting import GradientBoostModel, train_gradient_boost
from .forest import RandomForestModel, train_random_forest
from .knn import KnnModel, train_knn
from .logistic import LogisticRegressionModel, train_logistic_regression
from .naive_bayes import NaiveBayesModel, train_naive_bayes
from .svm import SvmModel, train_svm
from .tree import DecisionTreeModel, train_decision_tree

__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "TrainLog",
    "TrainedModel",
    "train_model",
    "model_from_json_dict",
    "train_naive_bayes",
    "train_knn",
    "train_svm",
    "train_decision_tree",
    "train_random_forest",
    "train_gradient_boost",
    "train_logistic_regression",
    "train_ann",
]

_NEEDS_RNG = {"random_forest", "ann"}

_MODEL_CLASSES = {
    "naive_bayes": NaiveBayesModel,
    "knn": KnnModel,
    "svm": SvmModel,
    "decision_tree": DecisionTreeModel,
    "random_forest": RandomForestModel,
    "gradient_boost": GradientBoostModel,
    "logistic_regression": LogisticRegressionModel,
    "ann": AnnModel,
}

_TRAINERS = {
    "naive_bayes": train_naive_bayes,
    "knn": train_knn,
    "svm": train_svm,
    "decision_tree": train_decision_tree,
    "random_forest": train_random_forest,
    "gradient_boost": train_gradient_boost,
    "logistic_regression": train_logistic_regression,
    "ann": train_ann,
}


def train_model(spec: ModelSpec, m: DesignMatrix, rng: SeededRng | None = None) -> TrainedModel:
    """Dispatch a ModelSpec to its trainer; seeded kinds get `rng`."""
    trainer = _TRAINERS[spec.kind]
    kwargs = dict(spec.params)
    kwargs.pop("lambda", None)
    kwargs.pop("gamma", None)
    if spec.kind in _NEEDS_RNG:
        kwargs["rng"] = rng or SeededRng(0)
    return trainer(m, **kwargs)


def model_from_json_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != "asdkit-model/1":
        raise ValueError(f"unsupported model document format {doc.get('format')!r}")
    kind = doc["kind"]
    cls = _MODEL_CLASSES[kind]
    spec = ModelSpec(kind, doc["params"])
    return cls.from_state(spec, int(doc["n_features"]), doc["state"])
