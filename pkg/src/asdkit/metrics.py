"""Classification and clustering evaluation measures.

Eight classification metrics driven by confusion counts and class-1
probabilities (accuracy, precision, recall, specificity, F1, ROC-AUC,
Cohen's kappa, log loss) plus the three clustering measures (NMI with
arithmetic-mean normalisation, adjusted Rand index, silhouette).  All rates
are fractions in [0, 1]; report renderers format them as percentages with
two decimals.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .numerics import Matrix

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "ClusterReport",
    "MetricWarning",
    "confusion",
    "classification_metrics",
    "cohen_kappa",
    "roc_auc",
    "log_loss",
    "nmi",
    "ari",
    "silhouette",
    "PROB_CLIP",
]

PROB_CLIP = 1e-15


class MetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """One classification-result row: all eight measures as plain floats."""

    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    auc: float
    kappa: float
    log_loss: float

    def __post_init__(self):
        # NaN marks a metric undefined on this sample (e.g. AUC on a
        # single-class fold) and is exempt from the range checks
        for name in ("accuracy", "precision", "recall", "specificity", "f1", "auc"):
            v = getattr(self, name)
            if not math.isnan(v) and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0,1]: {v}")
        if not math.isnan(self.kappa) and not -1.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa out of [-1,1]: {self.kappa}")
        if self.log_loss < 0.0:
            raise ValueError("log loss must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def markdown_row(self, label: str) -> str:
        """Row in the column order of the result tables (rates as %)."""
        cells = [
            f"{self.accuracy * 100:.2f}",
            f"{self.precision * 100:.2f}",
            f"{self.recall * 100:.2f}",
            f"{self.specificity * 100:.2f}",
            f"{self.f1 * 100:.2f}",
            f"{self.auc * 100:.2f}",
            f"{self.kappa * 100:.2f}",
            f"{self.log_loss:.3f}",
        ]
        return "| " + " | ".join([label] + cells) + " |"

    @staticmethod
    def markdown_header() -> str:
        cols = [
            "Model",
            "Accuracy (%)",
            "Precision (%)",
            "Recall (%)",
            "Specificity (%)",
            "F1-score (%)",
            "AUC (%)",
            "Kappa (%)",
            "Log Loss",
        ]
        return "| " + " | ".join(cols) + " |\n|" + "---|" * len(cols)


@dataclass(frozen=True)
class ClusterReport:
    nmi: float
    ari: float
    silhouette: float

    def __post_init__(self):
        if not 0.0 <= self.nmi <= 1.0 + 1e-12:
            raise ValueError(f"nmi out of range: {self.nmi}")
        if not -1.0 <= self.ari <= 1.0 + 1e-12:
            raise ValueError(f"ari out of range: {self.ari}")
        if not -1.0 <= self.silhouette <= 1.0 + 1e-12:
            raise ValueError(f"silhouette out of range: {self.silhouette}")

    def to_dict(self) -> dict:
        return asdict(self)

    def markdown_row(self, label: str) -> str:
        return (
            f"| {label} | {self.nmi:.3f} | {self.ari:.3f} | {self.silhouette:.3f} |"
        )

    @staticmethod
    def markdown_header() -> str:
        return "| Model | NMI | ARI | SC |\n|---|---|---|---|"


def _as_binary(y, name: str) -> np.ndarray:
    arr = np.asarray(y, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must be binary 0/1")
    return arr


def confusion(y_true, y_pred) -> ConfusionCounts:
    """Counts with class 1 (ASD) as the positive class."""
    t = _as_binary(y_true, "y_true")
    p = _as_binary(y_pred, "y_pred")
    if len(t) != len(p):
        raise ValueError("length mismatch between y_true and y_pred")
    tp = int(np.sum((t == 1) & (p == 1)))
    fp = int(np.sum((t == 0) & (p == 1)))
    tn = int(np.sum((t == 0) & (p == 0)))
    fn = int(np.sum((t == 1) & (p == 0)))
    return ConfusionCounts(tp, fp, tn, fn)


def _rate(num: int, den: int, name: str) -> float:
    if den == 0:
        warnings.warn(
            f"{name} has zero denominator; defining it as 0",
            MetricWarning,
            stacklevel=3,
        )
        return 0.0
    return num / den


def classification_metrics(c: ConfusionCounts) -> tuple[float, float, float, float, float]:
    """(accuracy, precision, recall, specificity, f1) from confusion counts."""
    if c.n == 0:
        raise ValueError("empty confusion counts")
    accuracy = (c.tp + c.tn) / c.n
    precision = _rate(c.tp, c.tp + c.fp, "precision")
    recall = _rate(c.tp, c.tp + c.fn, "recall")
    specificity = _rate(c.tn, c.tn + c.fp, "specificity")
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return accuracy, precision, recall, specificity, f1


def cohen_kappa(y_true, y_pred) -> float:
    """Chance-corrected agreement between two binary labelings."""
    t = _as_binary(y_true, "y_true")
    p = _as_binary(y_pred, "y_pred")
    if len(t) != len(p):
        raise ValueError("length mismatch")
    n = len(t)
    if n == 0:
        raise ValueError("empty labelings")
    p0 = float(np.mean(t == p))
    pe = 0.0
    for c in (0, 1):
        pe += float(np.mean(t == c)) * float(np.mean(p == c))
    if pe >= 1.0 - 1e-15:
        warnings.warn(
            "kappa undefined for two constant labelings; defining it as "
            "1 when identical else 0",
            MetricWarning,
            stacklevel=2,
        )
        return 1.0 if p0 == 1.0 else 0.0
    return (p0 - pe) / (1.0 - pe)


def roc_auc(y_true, scores) -> float:
    """Area under the ROC curve via the rank statistic, ties counting 1/2."""
    t = _as_binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if len(t) != len(s):
        raise ValueError("length mismatch")
    n1 = int(t.sum())
    n0 = len(t) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("roc_auc needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    r1 = float(ranks[t == 1].sum())
    return (r1 - n1 * (n1 + 1) / 2.0) / (n1 * n0)


def log_loss(y_true, scores) -> float:
    """Mean negative log likelihood with probabilities clipped to
    [1e-15, 1 - 1e-15]."""
    t = _as_binary(y_true, "y_true")
    p = np.clip(np.asarray(scores, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    if len(t) != len(p):
        raise ValueError("length mismatch")
    if len(t) == 0:
        raise ValueError("empty input")
    return float(-np.mean(t * np.log(p) + (1 - t) * np.log(1 - p)))


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(labels_a, labels_b) -> float:
    """Mutual information normalised by the arithmetic mean of entropies."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    if len(a) == 0:
        raise ValueError("empty labelings")
    table = _contingency(a, b)
    n = table.sum()
    ha = _entropy(table.sum(axis=1))
    hb = _entropy(table.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        warnings.warn(
            "nmi undefined for two single-cluster labelings; defining it as "
            "1 when identical else 0",
            MetricWarning,
            stacklevel=2,
        )
        return 1.0
    mi = 0.0
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            nij = table[i, j]
            if nij:
                mi += (nij / n) * math.log(n * nij / (rows[i] * cols[j]))
    mean_h = 0.5 * (ha + hb)
    if mean_h == 0.0:
        return 0.0
    return max(0.0, min(1.0, mi / mean_h))


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index via pair counting with chance correction."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    n = len(a)
    if n == 0:
        raise ValueError("empty labelings")
    table = _contingency(a, b)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = float(np.sum(comb2(table)))
    sum_a = float(np.sum(comb2(table.sum(axis=1))))
    sum_b = float(np.sum(comb2(table.sum(axis=0))))
    total = comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0 if sum_ij == expected else 0.0
    return (sum_ij - expected) / (max_index - expected)


def _pairwise_distances(X: np.ndarray, chunk: int = 128) -> np.ndarray:
    """Exact Euclidean distance matrix via direct differences, chunked to
    bound memory (the dot-product shortcut loses ~1e-9 to cancellation)."""
    n = X.shape[0]
    D = np.empty((n, n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = X[start:stop, None, :] - X[None, :, :]
        D[start:stop] = np.sqrt(np.sum(diff * diff, axis=2))
    return D


def silhouette(m: Matrix | np.ndarray, labels) -> float:
    """Mean silhouette score; singleton-cluster points contribute 0."""
    X = m.a if isinstance(m, Matrix) else np.asarray(m, dtype=np.float64)
    lab = np.asarray(labels)
    if X.shape[0] != len(lab):
        raise ValueError("length mismatch")
    uniq = np.unique(lab)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    D = _pairwise_distances(X)
    scores = np.zeros(len(lab))
    masks = {c: lab == c for c in uniq}
    sizes = {c: int(masks[c].sum()) for c in uniq}
    for i in range(len(lab)):
        own = lab[i]
        if sizes[own] <= 1:
            scores[i] = 0.0
            continue
        a = D[i][masks[own]].sum() / (sizes[own] - 1)
        b = np.inf
        for c in uniq:
            if c == own:
                continue
            b = min(b, D[i][masks[c]].mean())
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def full_report(y_true, y_pred, proba1) -> MetricsReport:
    """All eight classification metrics in one shot.

    AUC is NaN (with a warning) when only one class is present, which keeps
    per-fold reporting total for tiny folds such as leave-one-out.
    """
    c = confusion(y_true, y_pred)
    accuracy, precision, recall, specificity, f1 = classification_metrics(c)
    try:
        auc = roc_auc(y_true, proba1)
    except ValueError:
        warnings.warn(
            "AUC undefined on a single-class sample; recording NaN",
            MetricWarning,
            stacklevel=2,
        )
        auc = float("nan")
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        auc=auc,
        kappa=cohen_kappa(y_true, y_pred),
        log_loss=log_loss(y_true, proba1),
    )
