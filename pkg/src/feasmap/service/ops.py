"""Service operations: one function per endpoint, shared by HTTP and CLI.

These functions own all artifact IO; the FastAPI routes and the CLI are thin
shells around them.  Paths in requests are resolved on the local filesystem
of whichever process runs the operation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import storage
from ..config import (
    PRESET_NAMES,
    RunConfig,
    load_config,
    load_preset,
    preset_text,
    validate_config,
)
from ..dynamics import get_model
from ..errors import ConfigError, InvalidArgumentError
from ..oracle import label_dataset
from ..pipeline import RunManifest, build_ocp_spec, compare_runs, run_pipeline
from ..region import build_region, classify_batch, extract_boundary
from ..sampling import GeneratorInfo, SampleSet, halton_sample_set
from ..setgeom import EllipsoidSet, erode_ellipsoid
from ..svm import KernelSpec, TrainConfig, decision_values, train
from . import schemas

VERSION = "0.1.0"


def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=VERSION)


def list_presets() -> schemas.PresetListResponse:
    return schemas.PresetListResponse(names=list(PRESET_NAMES))


def get_preset(name: str) -> schemas.PresetResponse:
    return schemas.PresetResponse(name=name, text=preset_text(name))


def sample(req: schemas.SampleRequest) -> schemas.SampleResponse:
    model = get_model(req.model)
    ss = halton_sample_set(req.n, model.state_set, start_index=req.start_index)
    storage.write_samples_csv(req.out, ss.points)
    return schemas.SampleResponse(
        path=str(Path(req.out)), count=len(ss), dim=model.n
    )


def _load_run_config(
    config_path: str | None, config_text: str | None, preset: str | None = None
) -> RunConfig:
    given = [v for v in (config_path, config_text, preset) if v]
    if len(given) != 1:
        raise ConfigError("provide exactly one of config path, config text, or preset")
    if preset:
        return load_preset(preset)
    if config_path:
        return load_config(config_path)
    return validate_config(config_text or "")


def label(req: schemas.LabelRequest) -> schemas.LabelResponse:
    cfg = _load_run_config(req.config_path, req.config_text)
    spec = build_ocp_spec(cfg)
    points = storage.read_samples_csv(req.samples)
    model = spec.model
    ss = SampleSet(
        points=points,
        domain=model.state_set,
        generator=GeneratorInfo("file", points.shape[1], 0, points.shape[0]),
    )
    workers = req.workers if req.workers is not None else cfg.workers
    result = label_dataset(spec, ss, parallelism=workers)
    storage.write_labels_csv(req.out, result)
    positive = result.positive_count
    return schemas.LabelResponse(
        path=str(Path(req.out)),
        count=len(result),
        positive=positive,
        negative=len(result) - positive,
        degenerate=result.degenerate,
        mu_effective=spec.mu_effective,
    )


def train_model(req: schemas.TrainRequest) -> schemas.TrainResponse:
    data = storage.read_labels_csv(req.labels)
    model = train(
        data,
        KernelSpec(sigma=req.sigma),
        TrainConfig(
            regularization_L=req.regularization_L,
            kkt_tol=req.kkt_tol,
            max_passes=req.max_passes,
            seed=req.seed,
        ),
    )
    storage.save_svm_model(req.out, model)
    return schemas.TrainResponse(
        path=str(Path(req.out)),
        n_support=model.n_support,
        bias=model.bias,
        converged=model.converged,
        training_size=model.training_size,
    )


def calibrate_region(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
    svm_model = storage.load_svm_model(req.model)
    data = storage.read_labels_csv(req.labels)
    region = build_region(
        svm_model, data, delta=req.delta, mode=req.mode, w_bar=req.w_bar
    )
    storage.save_region(req.out, region)
    return schemas.CalibrateResponse(
        path=str(Path(req.out)), eps_plus=region.eps_plus, eps_minus=region.eps_minus
    )


def boundary(req: schemas.BoundaryRequest) -> schemas.BoundaryResponse:
    region = storage.load_region(req.region)
    model = get_model(req.model)
    cloud = extract_boundary(region, model.state_set, resolution=req.resolution)
    storage.write_boundary_csv(req.out, cloud)
    return schemas.BoundaryResponse(path=str(Path(req.out)), points=cloud.shape[0])


def erode(req: schemas.ErodeRequest) -> schemas.ErodeResponse:
    if (req.p_file is None) == (req.p_matrix is None):
        raise InvalidArgumentError("provide exactly one of p_file or p_matrix")
    if req.p_file is not None:
        P = np.loadtxt(req.p_file, delimiter=",", ndmin=2)
    else:
        P = np.asarray(req.p_matrix, dtype=float)
    ell = EllipsoidSet(P, req.mu)
    lam_max = float(ell.eigenvalues.max())
    max_margin = float(np.sqrt(req.mu / lam_max))
    if req.w_bar == 0.0:
        return schemas.ErodeResponse(
            mu0=req.mu, lambda_max=lam_max, max_margin=max_margin
        )
    eroded = erode_ellipsoid(ell, req.w_bar)
    return schemas.ErodeResponse(
        mu0=eroded.eroded_level, lambda_max=lam_max, max_margin=max_margin
    )


def _region_with_optional_cloud(region_path: str, boundary_path: str | None):
    region = storage.load_region(region_path)
    if boundary_path is not None:
        region.boundary_cloud = storage.read_boundary_csv(boundary_path)
    return region


def export_grid(req: schemas.ExportGridRequest) -> schemas.ExportGridResponse:
    region = _region_with_optional_cloud(req.region, req.boundary)
    model = get_model(req.model)
    box = model.state_set
    xs = np.linspace(box.lower[0], box.upper[0], req.resolution)
    ys = np.linspace(box.lower[1], box.upper[1], req.resolution)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([XX.ravel(), YY.ravel()], axis=1)
    phi = decision_values(region.svm, pts)
    verdicts = classify_batch(region, pts)
    storage.write_grid_csv(req.out, pts, phi, verdicts)
    return schemas.ExportGridResponse(path=str(Path(req.out)), rows=pts.shape[0])


def pipeline(req: schemas.PipelineRequest) -> schemas.PipelineResponse:
    cfg = _load_run_config(req.config_path, req.config_text, req.preset)
    if req.out_dir:
        cfg = RunConfig(**{**cfg.to_dict(), "out_dir": req.out_dir})
    manifest = run_pipeline(cfg, force=req.force)
    stages = [
        schemas.StageSummary(
            name=name,
            seconds=rec.get("seconds", 0.0),
            skipped=rec.get("skipped", False),
            outputs=rec.get("outputs", {}),
        )
        for name, rec in manifest.stages.items()
    ]
    labels = storage.read_labels_csv(manifest.artifact("labels.csv"))
    positive = sum(1 for s in labels if s.label == 1)
    return schemas.PipelineResponse(
        out_dir=manifest.out_dir,
        manifest_path=str(manifest.artifact("manifest.json")),
        stages=stages,
        positive_labels=positive,
    )


def compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
    report = compare_runs(
        RunManifest.load(req.manifest_a),
        RunManifest.load(req.manifest_b),
        slack=req.slack,
    )
    return schemas.CompareResponse(**report.to_dict())


def classify_points(req: schemas.ClassifyRequest) -> schemas.ClassifyResponse:
    region = _region_with_optional_cloud(req.region, req.boundary)
    model = get_model(req.model)
    pts = np.asarray(req.points, dtype=float)
    verdicts = classify_batch(region, pts, domain=model.state_set)
    phi = decision_values(region.svm, pts)
    return schemas.ClassifyResponse(verdicts=verdicts, phi=[float(v) for v in phi])
