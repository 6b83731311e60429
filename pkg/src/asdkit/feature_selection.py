"""Chi-square dependence ranking and top-k feature selection.

The statistic for one column is sum over the two classes of (O - E)^2 / E
where O is the class-conditional sum of the (nonnegative) feature values and
E its expectation under independence from the class.  One-hot groups are
aggregated back to their source attribute by summing member-column scores;
per-column scores stay available behind the `per_column` flag.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import DesignMatrix

__all__ = ["FeatureRanking", "chi_square_scores", "select_top_k", "ChiSquareWarning"]


class ChiSquareWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FeatureRanking:
    """Attributes ordered by descending chi-square score."""

    entries: tuple[tuple[str, float], ...]
    per_column: tuple[tuple[str, float], ...] = ()
    k_selected: int = 0

    def __post_init__(self):
        scores = [s for _, s in self.entries]
        if any(s < 0 for s in scores):
            raise ValueError("chi-square scores must be nonnegative")
        if scores != sorted(scores, reverse=True):
            raise ValueError("ranking entries must be sorted descending")

    def top(self, k: int) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries[:k])

    def score(self, attribute: str) -> float:
        for name, s in self.entries:
            if name == attribute:
                return s
        raise KeyError(attribute)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("attribute,score\n")
        for name, s in self.entries:
            buf.write(f"{name},{s!r}\n")
        return buf.getvalue()


def _column_chi2(values: np.ndarray, y: np.ndarray, n1: int, n0: int, name: str) -> float:
    if np.any(values < 0):
        raise ValueError(f"column {name!r} has negative values; scale first")
    total = float(values.sum())
    n = len(values)
    if total == 0.0 or n1 == 0 or n0 == 0:
        warnings.warn(
            f"degenerate chi-square for column {name!r} (zero expected count); "
            "scoring it 0",
            ChiSquareWarning,
            stacklevel=3,
        )
        return 0.0
    o1 = float(values[y == 1].sum())
    o0 = total - o1
    e1 = total * n1 / n
    e0 = total * n0 / n
    return (o1 - e1) ** 2 / e1 + (o0 - e0) ** 2 / e0


def chi_square_scores(m: DesignMatrix) -> FeatureRanking:
    """Rank source attributes by class dependence (see module docstring)."""
    y = m.y
    n1 = int(y.sum())
    n0 = len(y) - n1
    per_col = []
    agg: dict[str, float] = {}
    order: list[str] = []
    for j, col in enumerate(m.columns):
        s = _column_chi2(m.x.a[:, j], y, n1, n0, col.name)
        per_col.append((col.name, s))
        if col.source not in agg:
            agg[col.source] = 0.0
            order.append(col.source)
        agg[col.source] += s
    # sort descending; ties broken by original attribute order
    pos = {name: i for i, name in enumerate(order)}
    entries = sorted(agg.items(), key=lambda kv: (-kv[1], pos[kv[0]]))
    return FeatureRanking(tuple(entries), tuple(per_col))


def select_top_k(m: DesignMatrix, ranking: FeatureRanking, k: int) -> DesignMatrix:
    """Restrict the matrix to columns sourced from the top-k attributes.

    Column order is preserved; the attribute universe is the ranking's.
    """
    if not 1 <= k <= len(ranking.entries):
        raise ValueError(f"k must be in 1..{len(ranking.entries)}")
    keep = set(ranking.top(k))
    col_idx = [j for j, c in enumerate(m.columns) if c.source in keep]
    selected = m.take_columns(col_idx)
    return selected
