"""Calibrated inner/outer approximations of the learned feasible region.

Calibration repairs the degenerate threshold optimizations: thresholds are
set against the *opposite* class, which is the only way the stated guarantee
(the inner approximation holds no infeasible training sample, the outer none
feasible) can hold by construction.  ``strict`` is that rule; ``margin``
keeps the region's own class outside the band instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import BoxSet
from .errors import (
    DegenerateDataError,
    InvalidArgumentError,
    MissingBoundaryError,
    OutOfDomainError,
)
from .sampling import halton
from .svm import SvmModel, decision_values

INNER = "inner"
OUTER = "outer"
BAND = "band"
ROBUST_INNER = "robust_inner"

VERDICTS = (INNER, OUTER, BAND, ROBUST_INNER)

BOUNDARY_PHI_TOL = 1e-6
BOUNDARY_POS_TOL = 1e-8


class EmptyBoundaryWarning(UserWarning):
    pass


@dataclass(eq=False)
class RegionModel:
    """Trained classifier plus calibrated thresholds and robust margin.

    Mutable only in that ``boundary_cloud`` is attached once by
    :func:`extract_boundary`; treat instances as frozen afterwards.
    """

    svm: SvmModel
    eps_plus: float
    eps_minus: float
    w_bar: float = 0.0
    calibration: str = "strict"
    boundary_cloud: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.eps_minus > self.eps_plus:
            raise InvalidArgumentError("eps_minus must not exceed eps_plus")
        if self.w_bar < 0.0:
            raise InvalidArgumentError("w_bar must be nonnegative")
        if self.boundary_cloud is not None:
            cloud = np.atleast_2d(np.asarray(self.boundary_cloud, dtype=float))
            object.__setattr__(self, "boundary_cloud", cloud)

    @property
    def dim(self) -> int:
        return self.svm.dim


def calibrate_scores(
    phi: np.ndarray, labels: np.ndarray, delta: float = 1e-6, mode: str = "strict"
) -> tuple[float, float]:
    """Thresholds from raw decision scores and their oracle labels."""
    if delta <= 0.0:
        raise InvalidArgumentError("delta must be positive")
    phi = np.asarray(phi, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    neg = labels == -1
    if not pos.any() or not neg.any():
        raise DegenerateDataError("calibration requires samples of both classes")
    if mode == "strict":
        eps_plus = max(0.0, float(phi[neg].max())) + delta
        eps_minus = min(0.0, float(phi[pos].min())) - delta
    elif mode == "margin":
        # Clamped toward zero so the band never flips past the zero level set.
        eps_plus = max(0.0, float(phi[pos].min()))
        eps_minus = min(0.0, float(phi[neg].max()))
    else:
        raise InvalidArgumentError(f"unknown calibration mode '{mode}'")
    return eps_plus, eps_minus


def calibrate(
    svm_model: SvmModel, data, delta: float = 1e-6, mode: str = "strict"
) -> tuple[float, float]:
    """Thresholds (eps_plus, eps_minus) from labeled training samples."""
    points = np.array([np.asarray(s.state, dtype=float) for s in data])
    labels = np.array([s.label for s in data])
    phi = decision_values(svm_model, points)
    return calibrate_scores(phi, labels, delta=delta, mode=mode)


def build_region(
    svm_model: SvmModel,
    data,
    delta: float = 1e-6,
    mode: str = "strict",
    w_bar: float = 0.0,
) -> RegionModel:
    eps_plus, eps_minus = calibrate(svm_model, data, delta=delta, mode=mode)
    return RegionModel(
        svm=svm_model,
        eps_plus=eps_plus,
        eps_minus=eps_minus,
        w_bar=w_bar,
        calibration=mode,
    )


def _min_cloud_distance(cloud: np.ndarray, pts: np.ndarray) -> np.ndarray:
    out = np.empty(pts.shape[0])
    chunk = 2048
    for i in range(0, pts.shape[0], chunk):
        block = pts[i : i + chunk]
        d2 = ((block[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
        out[i : i + chunk] = np.sqrt(d2.min(axis=1))
    return out


def classify_batch(
    region: RegionModel, points: np.ndarray, domain: BoxSet | None = None
) -> list[str]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if domain is not None and not np.all(domain.contains(pts)):
        raise OutOfDomainError("query points must lie inside the state box")
    phi = decision_values(region.svm, pts)
    verdicts = np.where(
        phi > region.eps_plus, INNER, np.where(phi < region.eps_minus, OUTER, BAND)
    ).astype(object)
    if region.w_bar > 0.0 and region.boundary_cloud is not None:
        inner_rows = verdicts == INNER
        if inner_rows.any():
            dist = _min_cloud_distance(region.boundary_cloud, pts[inner_rows])
            robust = dist >= region.w_bar
            verdicts[np.flatnonzero(inner_rows)[robust]] = ROBUST_INNER
    return list(verdicts)


def classify(region: RegionModel, x, domain: BoxSet | None = None) -> str:
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1:
        raise InvalidArgumentError("classify expects a single point")
    return classify_batch(region, xv[None, :], domain=domain)[0]


def _bisect_edges(region: RegionModel, A: np.ndarray, B: np.ndarray, fA: np.ndarray) -> np.ndarray:
    """Vectorized sign-change bisection along many segments at once."""
    lo, hi = A.copy(), B.copy()
    sign_a = fA > 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = decision_values(region.svm, mid)
        same = (fm > 0.0) == sign_a
        lo = np.where(same[:, None], mid, lo)
        hi = np.where(same[:, None], hi, mid)
        width = np.abs(hi - lo).max()
        if width <= BOUNDARY_POS_TOL and np.abs(fm).max() <= BOUNDARY_PHI_TOL:
            break
    return 0.5 * (lo + hi)


def extract_boundary(
    region: RegionModel,
    domain: BoxSet,
    resolution: int = 64,
    seed: int = 0,
) -> np.ndarray:
    """Locate the zero level set of phi and attach the cloud to the region.

    In two dimensions the domain grid is scanned for sign-changing edges
    (marching-squares style) and each edge is bisected; other dimensions fall
    back to bisection along rays between opposite-sign sample pairs.
    """
    if resolution < 2:
        raise InvalidArgumentError("resolution must be at least 2")
    dim = domain.dim
    if dim == 2:
        xs = np.linspace(domain.lower[0], domain.upper[0], resolution + 1)
        ys = np.linspace(domain.lower[1], domain.upper[1], resolution + 1)
        XX, YY = np.meshgrid(xs, ys, indexing="ij")
        nodes = np.stack([XX.ravel(), YY.ravel()], axis=1)
        phi = decision_values(region.svm, nodes).reshape(XX.shape)
        pos = phi > 0.0
        seg_a, seg_b, seg_f = [], [], []
        flip_x = pos[1:, :] != pos[:-1, :]
        ii, jj = np.nonzero(flip_x)
        if ii.size:
            seg_a.append(np.stack([xs[ii], ys[jj]], axis=1))
            seg_b.append(np.stack([xs[ii + 1], ys[jj]], axis=1))
            seg_f.append(phi[ii, jj])
        flip_y = pos[:, 1:] != pos[:, :-1]
        ii, jj = np.nonzero(flip_y)
        if ii.size:
            seg_a.append(np.stack([xs[ii], ys[jj]], axis=1))
            seg_b.append(np.stack([xs[ii], ys[jj + 1]], axis=1))
            seg_f.append(phi[ii, jj])
        if not seg_a:
            warnings.warn(
                "no sign change on the grid; region is one-sided at this resolution",
                EmptyBoundaryWarning,
                stacklevel=2,
            )
            cloud = np.zeros((0, dim))
        else:
            A = np.vstack(seg_a)
            B = np.vstack(seg_b)
            F = np.concatenate(seg_f)
            cloud = _bisect_edges(region, A, B, F)
    else:
        probes = domain.lower + halton(
            max(resolution**2, 512), dim, start_index=1
        ) * (domain.upper - domain.lower)
        phi = decision_values(region.svm, probes)
        pos_pts = probes[phi > 0.0]
        neg_pts = probes[phi <= 0.0]
        if pos_pts.shape[0] == 0 or neg_pts.shape[0] == 0:
            warnings.warn(
                "no sign change among probe points; region is one-sided",
                EmptyBoundaryWarning,
                stacklevel=2,
            )
            cloud = np.zeros((0, dim))
        else:
            rng = np.random.default_rng(seed)
            n_rays = min(pos_pts.shape[0] * 4, 4096)
            a_idx = rng.integers(0, pos_pts.shape[0], n_rays)
            b_idx = rng.integers(0, neg_pts.shape[0], n_rays)
            A = pos_pts[a_idx]
            B = neg_pts[b_idx]
            F = decision_values(region.svm, A)
            cloud = _bisect_edges(region, A, B, F)
    region.boundary_cloud = cloud
    return cloud


def erode_region(region: RegionModel, w_bar: float):
    """Robust membership predicate: inner and at least w_bar from the boundary."""
    if w_bar < 0.0:
        raise InvalidArgumentError("w_bar must be nonnegative")
    if region.boundary_cloud is None or region.boundary_cloud.shape[0] == 0:
        raise MissingBoundaryError(
            "no boundary cloud available: run extract_boundary before eroding"
        )
    cloud = region.boundary_cloud

    def robust_inner(points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phi = decision_values(region.svm, pts)
        inner = phi > region.eps_plus
        if w_bar == 0.0:
            return inner
        dist = _min_cloud_distance(cloud, pts)
        return inner & (dist >= w_bar)

    return robust_inner


@dataclass(frozen=True)
class RegionReport:
    inner_fraction: float
    band_fraction: float
    outer_fraction: float
    strictness_violations: int
    heldout_accuracy: float
    n_probe: int


def region_metrics(region: RegionModel, probe_points, labeled) -> RegionReport:
    """Monte Carlo volume fractions plus strictness and held-out accuracy."""
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    phi = decision_values(region.svm, pts)
    inner = phi > region.eps_plus
    outer = phi < region.eps_minus
    band = ~inner & ~outer

    lab_pts = np.array([np.asarray(s.state, dtype=float) for s in labeled])
    lab = np.array([s.label for s in labeled])
    lab_phi = decision_values(region.svm, lab_pts)
    strict_viol = int(((lab == -1) & (lab_phi > region.eps_plus)).sum()) + int(
        ((lab == 1) & (lab_phi < region.eps_minus)).sum()
    )
    pred = np.where(lab_phi >= 0.0, 1, -1)
    return RegionReport(
        inner_fraction=float(inner.mean()),
        band_fraction=float(band.mean()),
        outer_fraction=float(outer.mean()),
        strictness_violations=strict_viol,
        heldout_accuracy=float((pred == lab).mean()),
        n_probe=pts.shape[0],
    )
