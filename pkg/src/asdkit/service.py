"""HTTP screening service: serve trained models behind a JSON API.

POST /screen applies a model's frozen preprocessing pipeline to one
questionnaire submission and returns the two class probabilities, the
predicted label, and the AQ-10 sum.  GET /models lists the loaded model
descriptors; GET /health is a liveness probe.  Model state is immutable
after load and shared read-only across requests, so identical payloads get
identical answers.

This is a screening aid for clinicians, not a diagnostic device.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .classifiers import TrainedModel, model_from_json_dict
from .dataset import MISSING, DataTable
from .pipeline import FrozenPipeline

__all__ = ["create_app", "LoadedModel", "load_model_dir"]


class ScreeningRequest(BaseModel):
    a1: int = Field(ge=0, le=1)
    a2: int = Field(ge=0, le=1)
    a3: int = Field(ge=0, le=1)
    a4: int = Field(ge=0, le=1)
    a5: int = Field(ge=0, le=1)
    a6: int = Field(ge=0, le=1)
    a7: int = Field(ge=0, le=1)
    a8: int = Field(ge=0, le=1)
    a9: int = Field(ge=0, le=1)
    a10: int = Field(ge=0, le=1)
    age: float = Field(gt=0)
    gender: str | None = None
    ethnicity: str | None = None
    jaundice: str | None = None
    family_autism: str | None = None
    country: str | None = None
    used_app_before: str | None = None
    relation: str | None = None

    def aq10_sum(self) -> int:
        return sum(getattr(self, f"a{i}") for i in range(1, 11))


class ScreeningResponse(BaseModel):
    asd_probability: float
    non_asd_probability: float
    predicted_label: str
    model_id: str
    aq10_sum: int


class ModelDescriptor(BaseModel):
    model_id: str
    kind: str
    dataset: str
    accuracy: float


class LoadedModel:
    """One served model: fitted state, frozen pipeline, stored report."""

    def __init__(self, model_id: str, model: TrainedModel, pipeline: FrozenPipeline,
                 dataset: str, accuracy: float):
        self.model_id = model_id
        self.model = model
        self.pipeline = pipeline
        self.dataset = dataset
        self.accuracy = accuracy

    def descriptor(self) -> ModelDescriptor:
        return ModelDescriptor(
            model_id=self.model_id,
            kind=self.model.kind,
            dataset=self.dataset,
            accuracy=self.accuracy,
        )


def load_model_dir(path: Path, model_id: str | None = None) -> LoadedModel:
    model_doc = json.loads((path / "model.json").read_text())
    pipeline = FrozenPipeline.from_dict(
        json.loads((path / "pipeline.json").read_text())
    )
    if model_doc.get("pipeline_hash") not in (None, pipeline.content_hash):
        raise ValueError(f"{path}: model/pipeline hash mismatch")
    report = json.loads((path / "report.json").read_text())
    return LoadedModel(
        model_id=model_id or path.name,
        model=model_from_json_dict(model_doc),
        pipeline=pipeline,
        dataset=model_doc.get("dataset", report.get("dataset", "unknown")),
        accuracy=float(report["metrics"]["accuracy"]),
    )


# request field -> source attribute name in the UCI schema
_FIELD_TO_ATTR = {
    "gender": "gender",
    "ethnicity": "ethnicity",
    "jaundice": "jundice",
    "family_autism": "austim",
    "country": "contry_of_res",
    "used_app_before": "used_app_before",
    "relation": "relation",
}


def request_to_table(req: ScreeningRequest, pipeline: FrozenPipeline) -> DataTable:
    """One-row table in the pipeline's schema; omitted fields are MISSING
    (imputed by the frozen training-time fills)."""
    schema = pipeline.schema
    cells = []
    for attr in schema.attributes:
        name = attr.name
        if name.startswith("A") and name.endswith("_Score"):
            idx = int(name[1:name.index("_")])
            cells.append(str(getattr(req, f"a{idx}")))
        elif name == "age":
            cells.append(float(req.age))
        elif name == "result":
            cells.append(float(req.aq10_sum()))
        elif name == "age_desc":
            # constant within each source dataset; serve-time rows take the
            # training value via the frozen fill
            cells.append(MISSING)
        elif name == schema.label_name:
            cells.append(attr.categories[0])  # placeholder, never used
        else:
            field = next((f for f, a in _FIELD_TO_ATTR.items() if a == name), None)
            value = getattr(req, field) if field else None
            cells.append(MISSING if value is None else value)
    return DataTable(schema, (tuple(cells),))


def create_app(model_dirs: list[Path] | None = None,
               models: list[LoadedModel] | None = None,
               default_model: str | None = None,
               cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="asdkit screening service", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry: dict[str, LoadedModel] = {}
    for lm in models or []:
        registry[lm.model_id] = lm
    for d in model_dirs or []:
        lm = load_model_dir(Path(d))
        registry[lm.model_id] = lm
    default_id = default_model or (next(iter(registry)) if registry else None)
    if default_model and default_model not in registry:
        raise ValueError(f"default model {default_model!r} not loaded")
    app.state.registry = registry
    app.state.default_id = default_id

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/models", response_model=list[ModelDescriptor])
    def list_models():
        return [lm.descriptor() for lm in registry.values()]

    @app.post("/screen", response_model=ScreeningResponse)
    def screen(req: ScreeningRequest, model_id: str | None = None):
        mid = model_id or app.state.default_id
        if mid is None or mid not in registry:
            raise HTTPException(status_code=503, detail="no model loaded")
        lm = registry[mid]
        row = request_to_table(req, lm.pipeline)
        m = lm.pipeline.transform_table(row, on_unseen="zeros")
        proba = lm.model.predict_proba(m.x)[0]
        label = int(lm.model.predict(m.x)[0])
        return ScreeningResponse(
            asd_probability=float(proba[1]),
            non_asd_probability=float(proba[0]),
            predicted_label="ASD" if label == 1 else "non-ASD",
            model_id=mid,
            aq10_sum=req.aq10_sum(),
        )

    return app
