"""Frozen preprocessing pipeline shared by experiments and the service.

A pipeline captures everything needed to replay the training-time transform
on new data: the schema with its category lists, the fitted imputation fill
values, the per-column min/max scaling parameters, the chi-square attribute
ranking, and the selected attribute set.  It serialises to a JSON document
whose SHA-256 identifies the transform; the screening service applies the
identical transform bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .dataset import (
    MISSING,
    Attribute,
    DataTable,
    DesignMatrix,
    FeatureSchema,
    ScaleParams,
    apply_scale,
    count_missing,
    encode,
    impute,
    median_fill_values,
    min_max_scale,
)
from .feature_selection import FeatureRanking, chi_square_scores, select_top_k

__all__ = ["FrozenPipeline", "build_pipeline", "canonical_json", "sha256_of"]

LEAKY_ATTRIBUTE = "result"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_of(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _schema_to_dict(schema: FeatureSchema) -> dict:
    return {
        "relation": schema.relation,
        "label": schema.label_name,
        "attributes": [
            {"name": a.name, "kind": a.kind, "categories": list(a.categories)}
            for a in schema.attributes
        ],
    }


def _schema_from_dict(d: dict) -> FeatureSchema:
    attrs = tuple(
        Attribute(a["name"], a["kind"], tuple(a["categories"]))
        for a in d["attributes"]
    )
    return FeatureSchema(attrs, d["label"], d["relation"])


@dataclass(frozen=True)
class FrozenPipeline:
    schema: FeatureSchema
    impute_strategy: str
    fill_values: dict  # attribute -> median/mode fill
    scale: ScaleParams
    ranking: FeatureRanking
    selected_attributes: tuple[str, ...]
    drop_leaky: bool

    def to_dict(self) -> dict:
        return {
            "format": "asdkit-pipeline/1",
            "schema": _schema_to_dict(self.schema),
            "impute_strategy": self.impute_strategy,
            "fill_values": dict(self.fill_values),
            "scale": self.scale.to_dict(),
            "ranking": [[n, s] for n, s in self.ranking.entries],
            "selected_attributes": list(self.selected_attributes),
            "drop_leaky": self.drop_leaky,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def content_hash(self) -> str:
        return sha256_of(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "FrozenPipeline":
        if d.get("format") != "asdkit-pipeline/1":
            raise ValueError("unsupported pipeline document")
        return cls(
            schema=_schema_from_dict(d["schema"]),
            impute_strategy=d["impute_strategy"],
            fill_values=dict(d["fill_values"]),
            scale=ScaleParams.from_dict(d["scale"]),
            ranking=FeatureRanking(tuple((n, float(s)) for n, s in d["ranking"])),
            selected_attributes=tuple(d["selected_attributes"]),
            drop_leaky=bool(d["drop_leaky"]),
        )

    # ------------------------------------------------------------------
    def transform_table(self, table: DataTable, on_unseen: str = "error") -> DesignMatrix:
        """Replay the frozen transform on a raw table."""
        if count_missing(table)["total"]:
            filled_rows = []
            for row in table.rows:
                filled_rows.append(
                    tuple(
                        self.fill_values.get(a.name) if v is MISSING else v
                        for v, a in zip(row, table.schema.attributes)
                    )
                )
            table = DataTable(table.schema, tuple(filled_rows))
        m = encode(table, schema=self.schema, on_unseen=on_unseen)
        m = apply_scale(m, self.scale)
        keep = set(self.selected_attributes)
        col_idx = [j for j, c in enumerate(m.columns) if c.source in keep]
        return m.take_columns(col_idx)


def build_pipeline(
    table: DataTable,
    impute_strategy: str = "median",
    knn_k: int = 5,
    drop_max_missing: int = 3,
    top_k: int = 10,
    drop_leaky: bool = False,
) -> tuple[FrozenPipeline, DesignMatrix]:
    """Fit the preprocessing chain on a raw table.

    Order follows the screening pipeline: impute, encode, scale, optionally
    drop the leaky AQ-10 sum, rank by chi-square, restrict to the top-k
    attributes.  Returns the frozen pipeline and the transformed matrix.
    """
    imputed = impute(
        table, impute_strategy, k=knn_k, max_missing=drop_max_missing
    )
    # fills recorded for serve-time imputation regardless of train strategy
    fills = median_fill_values(imputed)
    m = encode(imputed)
    m, scale_params = min_max_scale(m)
    if drop_leaky:
        col_idx = [
            j for j, c in enumerate(m.columns) if c.source != LEAKY_ATTRIBUTE
        ]
        m = m.take_columns(col_idx)
    ranking = chi_square_scores(m)
    k = min(top_k, len(ranking.entries))
    selected = select_top_k(m, ranking, k)
    pipe = FrozenPipeline(
        schema=table.schema,
        impute_strategy=impute_strategy,
        fill_values=fills,
        scale=scale_params,
        ranking=ranking,
        selected_attributes=ranking.top(k),
        drop_leaky=drop_leaky,
    )
    return pipe, selected
