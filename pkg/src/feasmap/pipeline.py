"""End-to-end run orchestration with per-stage checksums and skipping.

A run directory holds one artifact per stage: samples.csv, labels.csv,
model.svm, region.rgn, boundary.csv, erode.json, grid.csv, plus
manifest.json recording the config snapshot and the checksum chain.  A stage
is skipped when its recorded parameter subset and input checksums match the
current state and its outputs still exist on disk; mutating any upstream
artifact therefore re-runs everything downstream of it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import storage
from .config import RunConfig
from .dynamics import get_model
from .errors import InvalidComparisonError, StageError
from .oracle import CART_SPRING_P, OcpSpec, cart_spring_ocp, label_dataset
from .region import INNER, ROBUST_INNER, RegionModel, build_region, classify_batch, extract_boundary
from .sampling import GeneratorInfo, SampleSet, halton_sample_set
from .setgeom import EllipsoidSet, erode_ellipsoid
from .svm import KernelSpec, TrainConfig, decision_values, train

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

STAGE_ORDER = ("sample", "label", "train", "calibrate", "boundary", "erode", "export")

_ARTIFACTS = {
    "sample": ("samples.csv",),
    "label": ("labels.csv",),
    "train": ("model.svm",),
    "calibrate": ("region.rgn",),
    "boundary": ("boundary.csv",),
    "erode": ("erode.json",),
    "export": ("grid.csv",),
}

_INPUTS = {
    "sample": (),
    "label": ("samples.csv",),
    "train": ("labels.csv",),
    "calibrate": ("model.svm", "labels.csv"),
    "boundary": ("region.rgn",),
    "erode": ("region.rgn", "boundary.csv"),
    "export": ("region.rgn", "boundary.csv"),
}


@dataclass
class RunManifest:
    config: dict
    out_dir: str
    stages: dict = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def stage_seconds(self, name: str) -> float:
        return self.stages.get(name, {}).get("seconds", 0.0)

    def artifact(self, name: str) -> Path:
        return Path(self.out_dir) / name

    @property
    def complete(self) -> bool:
        return all(s in self.stages for s in STAGE_ORDER)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "out_dir": self.out_dir,
            "stages": self.stages,
        }

    def save(self) -> Path:
        path = Path(self.out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        p = Path(path)
        if p.is_dir():
            p = p / MANIFEST_NAME
        raw = json.loads(p.read_text())
        return cls(
            config=raw["config"],
            out_dir=raw["out_dir"],
            stages=raw["stages"],
            version=raw.get("version", MANIFEST_VERSION),
        )


def build_ocp_spec(config: RunConfig) -> OcpSpec:
    """OCP instance for a registry model, with robust terminal erosion applied."""
    if config.model != "cart_spring":
        raise StageError(
            "label", f"no cost/terminal parameters registered for model '{config.model}'"
        )
    mu_eff = None
    if config.robust and config.w_bar > 0.0:
        eroded = erode_ellipsoid(EllipsoidSet(CART_SPRING_P, config.mu), config.w_bar)
        mu_eff = eroded.eroded_level
    return cart_spring_ocp(
        horizon_T=config.horizon_T,
        mu=config.mu,
        segments=config.segments,
        steps_per_segment=config.steps_per_segment,
        feas_tol=config.feas_tol,
        restarts=config.restarts,
        mu_effective=mu_eff,
    )


def _grid_points(model, resolution: int) -> np.ndarray:
    box = model.state_set
    xs = np.linspace(box.lower[0], box.upper[0], resolution)
    ys = np.linspace(box.lower[1], box.upper[1], resolution)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([XX.ravel(), YY.ravel()], axis=1)


class _RunContext:
    """Lazy access to stage products, from memory or from disk."""

    def __init__(self, config: RunConfig, out: Path):
        self.config = config
        self.out = out
        self.model = get_model(config.model)
        self.cache: dict = {}

    def samples(self):
        if "samples" not in self.cache:
            pts = storage.read_samples_csv(self.out / "samples.csv")
            self.cache["samples"] = pts
        return self.cache["samples"]

    def labels(self):
        if "labels" not in self.cache:
            self.cache["labels"] = storage.read_labels_csv(self.out / "labels.csv")
        return self.cache["labels"]

    def svm_model(self):
        if "svm" not in self.cache:
            self.cache["svm"] = storage.load_svm_model(self.out / "model.svm")
        return self.cache["svm"]

    def region(self) -> RegionModel:
        if "region" not in self.cache:
            self.cache["region"] = storage.load_region(self.out / "region.rgn")
        return self.cache["region"]

    def boundary(self) -> np.ndarray:
        if "boundary" not in self.cache:
            self.cache["boundary"] = storage.read_boundary_csv(self.out / "boundary.csv")
        return self.cache["boundary"]

    def region_with_cloud(self) -> RegionModel:
        region = self.region()
        if region.boundary_cloud is None or region.boundary_cloud.shape[0] == 0:
            region.boundary_cloud = self.boundary()
        return region


def _stage_params(config: RunConfig, stage: str) -> dict:
    keys = {
        "sample": ("model", "n", "start_index"),
        "label": (
            "model", "horizon_T", "segments", "steps_per_segment", "mu",
            "feas_tol", "restarts", "robust", "w_bar",
        ),
        "train": ("sigma", "regularization_L", "kkt_tol", "max_passes", "seed"),
        "calibrate": ("delta", "calibration", "w_bar"),
        "boundary": ("boundary_resolution",),
        "erode": ("w_bar", "robust", "mu"),
        "export": ("grid_resolution",),
    }[stage]
    return {k: getattr(config, k) for k in keys}


def _run_sample(ctx: _RunContext) -> None:
    cfg = ctx.config
    ss = halton_sample_set(cfg.n, ctx.model.state_set, start_index=cfg.start_index)
    storage.write_samples_csv(ctx.out / "samples.csv", ss.points)
    ctx.cache["samples"] = ss.points


def _run_label(ctx: _RunContext) -> None:
    cfg = ctx.config
    spec = build_ocp_spec(cfg)
    generated = halton_sample_set(cfg.n, ctx.model.state_set, start_index=cfg.start_index)
    disk = ctx.samples()
    if disk.shape == generated.points.shape and np.array_equal(disk, generated.points):
        ss = generated
    else:
        # user swapped in custom samples; honor the file, not the generator
        ss = SampleSet(
            points=disk,
            domain=ctx.model.state_set,
            generator=GeneratorInfo("file", disk.shape[1], 0, disk.shape[0]),
        )
    result = label_dataset(spec, ss, parallelism=cfg.workers)
    storage.write_labels_csv(ctx.out / "labels.csv", result)
    ctx.cache["labels"] = list(result)


def _run_train(ctx: _RunContext) -> None:
    cfg = ctx.config
    model = train(
        ctx.labels(),
        KernelSpec(sigma=cfg.sigma),
        TrainConfig(
            regularization_L=cfg.regularization_L,
            kkt_tol=cfg.kkt_tol,
            max_passes=cfg.max_passes,
            seed=cfg.seed,
        ),
    )
    storage.save_svm_model(ctx.out / "model.svm", model)
    ctx.cache["svm"] = model


def _run_calibrate(ctx: _RunContext) -> None:
    cfg = ctx.config
    region = build_region(
        ctx.svm_model(),
        ctx.labels(),
        delta=cfg.delta,
        mode=cfg.calibration,
        w_bar=cfg.w_bar,
    )
    storage.save_region(ctx.out / "region.rgn", region)
    ctx.cache["region"] = region


def _run_boundary(ctx: _RunContext) -> None:
    cfg = ctx.config
    region = ctx.region()
    cloud = extract_boundary(
        region, ctx.model.state_set, resolution=cfg.boundary_resolution
    )
    storage.write_boundary_csv(ctx.out / "boundary.csv", cloud)
    ctx.cache["boundary"] = cloud


def _run_erode(ctx: _RunContext) -> None:
    cfg = ctx.config
    region = ctx.region_with_cloud()
    info: dict = {
        "w_bar": cfg.w_bar,
        "boundary_points": int(region.boundary_cloud.shape[0]),
    }
    if cfg.model == "cart_spring":
        ell = EllipsoidSet(CART_SPRING_P, cfg.mu)
        info["terminal_lambda_max"] = float(ell.eigenvalues.max())
        if cfg.w_bar > 0.0:
            eroded = erode_ellipsoid(ell, cfg.w_bar)
            info["terminal_mu0"] = eroded.eroded_level
    probe = halton_sample_set(2048, ctx.model.state_set, start_index=900_001)
    verdicts = classify_batch(region, probe.points)
    info["probe_inner_fraction"] = sum(
        v in (INNER, ROBUST_INNER) for v in verdicts
    ) / len(verdicts)
    info["probe_robust_inner_fraction"] = sum(
        v == ROBUST_INNER for v in verdicts
    ) / len(verdicts)
    (ctx.out / "erode.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def _run_export(ctx: _RunContext) -> None:
    cfg = ctx.config
    region = ctx.region_with_cloud()
    pts = _grid_points(ctx.model, cfg.grid_resolution)
    phi = decision_values(region.svm, pts)
    verdicts = classify_batch(region, pts)
    storage.write_grid_csv(ctx.out / "grid.csv", pts, phi, verdicts)


_RUNNERS = {
    "sample": _run_sample,
    "label": _run_label,
    "train": _run_train,
    "calibrate": _run_calibrate,
    "boundary": _run_boundary,
    "erode": _run_erode,
    "export": _run_export,
}


def run_pipeline(config: RunConfig, force: bool = False) -> RunManifest:
    """Execute (or re-validate) every stage; abort names the failing stage.

    The partial manifest is saved before a stage error propagates, so the
    completed prefix is never lost.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    previous = None
    prev_path = out / MANIFEST_NAME
    if prev_path.exists():
        try:
            previous = RunManifest.load(prev_path)
        except (json.JSONDecodeError, KeyError):
            previous = None
    manifest = RunManifest(config=config.to_dict(), out_dir=str(out))
    ctx = _RunContext(config, out)
    checksums: dict[str, str] = {}

    for stage in STAGE_ORDER:
        params = _stage_params(config, stage)
        inputs = {name: checksums[name] for name in _INPUTS[stage]}
        record = None
        if not force and previous is not None:
            old = previous.stages.get(stage)
            if (
                old is not None
                and old.get("params") == _jsonable(params)
                and old.get("inputs") == inputs
                and all((out / name).exists() for name in _ARTIFACTS[stage])
            ):
                outputs = {
                    name: storage.sha256_file(out / name)
                    for name in _ARTIFACTS[stage]
                }
                record = {
                    "params": _jsonable(params),
                    "inputs": inputs,
                    "outputs": outputs,
                    "seconds": old.get("seconds", 0.0),
                    "skipped": True,
                }
        if record is None:
            start = time.perf_counter()
            try:
                _RUNNERS[stage](ctx)
            except Exception as exc:
                manifest.save()
                if isinstance(exc, StageError):
                    raise
                raise StageError(stage, str(exc)) from exc
            outputs = {
                name: storage.sha256_file(out / name) for name in _ARTIFACTS[stage]
            }
            record = {
                "params": _jsonable(params),
                "inputs": inputs,
                "outputs": outputs,
                "seconds": round(time.perf_counter() - start, 6),
                "skipped": False,
            }
        manifest.stages[stage] = record
        checksums.update(record["outputs"])
    manifest.save()
    return manifest


def _jsonable(params: dict) -> dict:
    return json.loads(json.dumps(params))


@dataclass(frozen=True)
class ComparisonReport:
    inner_fraction_a: float
    inner_fraction_b: float
    inner_difference: float
    positive_labels_a: int
    positive_labels_b: int
    label_difference: int
    b_contains_a: bool
    slack: float

    @property
    def verdict(self) -> str:
        rel = "contains" if self.b_contains_a else "does not contain"
        return f"run B {rel} run A within slack {self.slack:.0%}"

    def to_dict(self) -> dict:
        return {
            "inner_fraction_a": self.inner_fraction_a,
            "inner_fraction_b": self.inner_fraction_b,
            "inner_difference": self.inner_difference,
            "positive_labels_a": self.positive_labels_a,
            "positive_labels_b": self.positive_labels_b,
            "label_difference": self.label_difference,
            "b_contains_a": self.b_contains_a,
            "slack": self.slack,
            "verdict": self.verdict,
        }


def compare_runs(
    manifest_a: RunManifest, manifest_b: RunManifest, slack: float = 0.01
) -> ComparisonReport:
    """Set-containment comparison of two completed runs on their shared grid."""
    if not (manifest_a.complete and manifest_b.complete):
        raise InvalidComparisonError("both runs must have completed every stage")
    if manifest_a.config.get("model") != manifest_b.config.get("model"):
        raise InvalidComparisonError("runs use different models")
    if manifest_a.config.get("grid_resolution") != manifest_b.config.get("grid_resolution"):
        raise InvalidComparisonError("runs use different probe grids")
    pts_a, _, verdicts_a = storage.read_grid_csv(manifest_a.artifact("grid.csv"))
    pts_b, _, verdicts_b = storage.read_grid_csv(manifest_b.artifact("grid.csv"))
    if pts_a.shape != pts_b.shape or not np.array_equal(pts_a, pts_b):
        raise InvalidComparisonError("probe grids differ between the runs")
    inner_a = np.array([v in (INNER, ROBUST_INNER) for v in verdicts_a])
    inner_b = np.array([v in (INNER, ROBUST_INNER) for v in verdicts_b])
    frac_a = float(inner_a.mean())
    frac_b = float(inner_b.mean())
    labels_a = storage.read_labels_csv(manifest_a.artifact("labels.csv"))
    labels_b = storage.read_labels_csv(manifest_b.artifact("labels.csv"))
    pos_a = sum(1 for s in labels_a if s.label == 1)
    pos_b = sum(1 for s in labels_b if s.label == 1)
    return ComparisonReport(
        inner_fraction_a=frac_a,
        inner_fraction_b=frac_b,
        inner_difference=frac_b - frac_a,
        positive_labels_a=pos_a,
        positive_labels_b=pos_b,
        label_difference=pos_b - pos_a,
        b_contains_a=bool(frac_b >= frac_a - slack),
        slack=slack,
    )
