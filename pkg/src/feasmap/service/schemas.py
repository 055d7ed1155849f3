"""Request/response models for the HTTP service (and the in-process CLI)."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(StrictModel):
    status: str
    version: str


class PresetListResponse(StrictModel):
    names: list[str]


class PresetResponse(StrictModel):
    name: str
    text: str


class SampleRequest(StrictModel):
    model: str = "cart_spring"
    n: int = Field(gt=0)
    start_index: int = Field(default=1, ge=0)
    out: str


class SampleResponse(StrictModel):
    path: str
    count: int
    dim: int


class LabelRequest(StrictModel):
    config_path: str | None = None
    config_text: str | None = None
    samples: str
    out: str
    workers: int | None = Field(default=None, gt=0)


class LabelResponse(StrictModel):
    path: str
    count: int
    positive: int
    negative: int
    degenerate: bool
    mu_effective: float | None = None


class TrainRequest(StrictModel):
    labels: str
    sigma: float = Field(gt=0)
    regularization_L: float = Field(gt=0)
    kkt_tol: float = Field(default=1e-3, gt=0)
    max_passes: int = Field(default=200_000, gt=0)
    seed: int = 0
    out: str


class TrainResponse(StrictModel):
    path: str
    n_support: int
    bias: float
    converged: bool
    training_size: int


class CalibrateRequest(StrictModel):
    model: str
    labels: str
    delta: float = Field(default=1e-6, gt=0)
    mode: str = "strict"
    w_bar: float = Field(default=0.0, ge=0)
    out: str


class CalibrateResponse(StrictModel):
    path: str
    eps_plus: float
    eps_minus: float


class BoundaryRequest(StrictModel):
    region: str
    resolution: int = Field(default=128, ge=2)
    out: str
    model: str = "cart_spring"


class BoundaryResponse(StrictModel):
    path: str
    points: int


class ErodeRequest(StrictModel):
    p_file: str | None = None
    p_matrix: list[list[float]] | None = None
    mu: float = Field(gt=0)
    w_bar: float = Field(ge=0)


class ErodeResponse(StrictModel):
    mu0: float
    lambda_max: float
    max_margin: float


class ExportGridRequest(StrictModel):
    region: str
    boundary: str | None = None
    resolution: int = Field(default=200, ge=2)
    out: str
    model: str = "cart_spring"


class ExportGridResponse(StrictModel):
    path: str
    rows: int


class PipelineRequest(StrictModel):
    config_path: str | None = None
    config_text: str | None = None
    preset: str | None = None
    out_dir: str | None = None
    force: bool = False


class StageSummary(StrictModel):
    name: str
    seconds: float
    skipped: bool
    outputs: dict[str, str]


class PipelineResponse(StrictModel):
    out_dir: str
    manifest_path: str
    stages: list[StageSummary]
    positive_labels: int | None = None


class CompareRequest(StrictModel):
    manifest_a: str
    manifest_b: str
    slack: float = Field(default=0.01, ge=0)


class CompareResponse(StrictModel):
    inner_fraction_a: float
    inner_fraction_b: float
    inner_difference: float
    positive_labels_a: int
    positive_labels_b: int
    label_difference: int
    b_contains_a: bool
    slack: float
    verdict: str


class ClassifyRequest(StrictModel):
    region: str
    boundary: str | None = None
    points: list[list[float]]
    model: str = "cart_spring"


class ClassifyResponse(StrictModel):
    verdicts: list[str]
    phi: list[float]


class ErrorResponse(StrictModel):
    detail: str
    kind: str
