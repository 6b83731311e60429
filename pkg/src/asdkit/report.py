"""Figure rendering for the report path.

Simple matplotlib bar charts written next to the delimited outputs: the
chi-square ranking of an experiment and the metric values of one or more
result rows.  The Agg backend keeps rendering headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .feature_selection import FeatureRanking
from .metrics import ClusterReport, MetricsReport

__all__ = ["ranking_figure", "metrics_figure", "cluster_figure"]


def ranking_figure(ranking: FeatureRanking, path: str | Path) -> Path:
    names = [n for n, _ in ranking.entries]
    scores = [s for _, s in ranking.entries]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    ax.barh(range(len(names)), scores, color="#4878d0")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("chi-square score")
    ax.set_title("Feature rank (chi-square)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


_METRIC_KEYS = ("accuracy", "precision", "recall", "specificity", "f1", "auc", "kappa")


def metrics_figure(reports: dict[str, MetricsReport], path: str | Path) -> Path:
    labels = list(reports.keys())
    width = 0.8 / max(len(labels), 1)
    fig, ax = plt.subplots(figsize=(9, 4))
    xs = range(len(_METRIC_KEYS))
    for i, label in enumerate(labels):
        vals = [getattr(reports[label], k) * 100 for k in _METRIC_KEYS]
        ax.bar([x + i * width for x in xs], vals, width=width, label=label)
    ax.set_xticks([x + 0.4 for x in xs])
    ax.set_xticklabels(_METRIC_KEYS, fontsize=8)
    ax.set_ylabel("%")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=7)
    ax.set_title("Classification metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def cluster_figure(reports: dict[str, ClusterReport], path: str | Path) -> Path:
    labels = list(reports.keys())
    keys = ("nmi", "ari", "silhouette")
    width = 0.8 / max(len(labels), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, label in enumerate(labels):
        vals = [getattr(reports[label], k) for k in keys]
        ax.bar([x + i * width for x in range(len(keys))], vals, width=width, label=label)
    ax.set_xticks([x + 0.4 for x in range(len(keys))])
    ax.set_xticklabels(keys)
    ax.legend(fontsize=7)
    ax.set_title("Clustering metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
