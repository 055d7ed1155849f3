"""FastAPI application exposing the pipeline and region-query operations."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (
    ConfigError,
    DegenerateDataError,
    FeasmapError,
    InvalidComparisonError,
    MissingBoundaryError,
    StageError,
)
from . import ops, schemas

_STATUS = {
    ConfigError: 400,
    InvalidComparisonError: 400,
    DegenerateDataError: 409,
    MissingBoundaryError: 409,
    StageError: 500,
}


def _status_for(exc: FeasmapError) -> int:
    for cls, status in _STATUS.items():
        if isinstance(exc, cls):
            return status
    return 400


def create_app() -> FastAPI:
    app = FastAPI(title="feasmap", version=ops.VERSION)

    @app.exception_handler(FeasmapError)
    async def feasmap_error_handler(_: Request, exc: FeasmapError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"detail": str(exc), "kind": exc.error_kind},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return ops.health()

    @app.get("/presets", response_model=schemas.PresetListResponse)
    def presets():
        return ops.list_presets()

    @app.get("/presets/{name}", response_model=schemas.PresetResponse)
    def preset(name: str):
        return ops.get_preset(name)

    @app.post("/sample", response_model=schemas.SampleResponse)
    def sample(req: schemas.SampleRequest):
        return ops.sample(req)

    @app.post("/label", response_model=schemas.LabelResponse)
    def label(req: schemas.LabelRequest):
        return ops.label(req)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        return ops.train_model(req)

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest):
        return ops.calibrate_region(req)

    @app.post("/boundary", response_model=schemas.BoundaryResponse)
    def boundary(req: schemas.BoundaryRequest):
        return ops.boundary(req)

    @app.post("/erode", response_model=schemas.ErodeResponse)
    def erode(req: schemas.ErodeRequest):
        return ops.erode(req)

    @app.post("/export-grid", response_model=schemas.ExportGridResponse)
    def export_grid(req: schemas.ExportGridRequest):
        return ops.export_grid(req)

    @app.post("/pipeline", response_model=schemas.PipelineResponse)
    def pipeline(req: schemas.PipelineRequest):
        return ops.pipeline(req)

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CompareRequest):
        return ops.compare(req)

    @app.post("/classify", response_model=schemas.ClassifyResponse)
    def classify(req: schemas.ClassifyRequest):
        return ops.classify_points(req)

    return app


app = create_app()
