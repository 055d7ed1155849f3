"""Ellipsoidal terminal sets, boundary distances, and disturbance erosion.

Erosion follows the conservative level-set shrink: for Omega = {x'Px <= mu},
every x with x'Px <= mu0 = (sqrt(mu) - w*sqrt(lam_max(P)))^2 keeps Euclidean
distance at least w from the boundary of Omega (triangle inequality in the
P-norm), so the shrunk ellipsoid is a valid robust-invariant core without
computing the exact erosion, which is not an ellipsoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SystemModel, rk4_step
from .errors import EmptyErosionError, InvalidArgumentError, OutOfDomainError

_MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EllipsoidSet:
    """Sublevel set {x : x'Px <= level} of a positive-definite quadratic."""

    P: np.ndarray
    level: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidArgumentError("P must be a square matrix")
        if np.abs(P - P.T).max() > 1e-10:
            raise InvalidArgumentError("P must be symmetric (tolerance 1e-10)")
        if not self.level > 0.0:
            raise InvalidArgumentError("ellipsoid level must be positive")
        evals, evecs = np.linalg.eigh(0.5 * (P + P.T))
        if evals.min() <= 0.0:
            raise InvalidArgumentError("P must be positive definite")
        object.__setattr__(self, "P", 0.5 * (P + P.T))
        object.__setattr__(self, "_evals", evals)
        object.__setattr__(self, "_evecs", evecs)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._evals

    @property
    def semi_axes(self) -> np.ndarray:
        """Semi-axis lengths sqrt(level / eigenvalue), ascending eigenvalue."""
        return np.sqrt(self.level / self._evals)

    def quad(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dim:
            raise InvalidArgumentError("point dimension does not match ellipsoid")
        return ((pts @ self.P) * pts).sum(axis=1)

    def boundary_points(self, count: int, seed: int = 0) -> np.ndarray:
        """Deterministic spread of points on the level surface."""
        if self.dim == 2:
            theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
            dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        else:
            rng = np.random.default_rng(seed)
            dirs = rng.standard_normal((count, self.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        scale = np.sqrt(self.level / self._evals)
        return (dirs * scale) @ self._evecs.T

    def sample_inside(self, count: int, seed: int = 0) -> np.ndarray:
        """Uniform (seeded) samples of the solid ellipsoid."""
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((count, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = rng.uniform(0.0, 1.0, count) ** (1.0 / self.dim)
        scale = np.sqrt(self.level / self._evals)
        return ((dirs * radii[:, None]) * scale) @ self._evecs.T


@dataclass(frozen=True, eq=False)
class ErodedEllipsoid:
    base: EllipsoidSet
    margin: float
    eroded_level: float

    @property
    def shrunk(self) -> EllipsoidSet:
        return EllipsoidSet(self.base.P, self.eroded_level)


def ellipsoid_contains(ell: EllipsoidSet, x) -> np.ndarray | bool:
    """Membership x'Px <= level (tolerance 1e-12); batched or single."""
    xv = np.asarray(x, dtype=float)
    single = xv.ndim == 1
    inside = ell.quad(xv) <= ell.level + _MEMBERSHIP_TOL
    return bool(inside[0]) if single else inside


def boundary_distances(ell: EllipsoidSet, X) -> np.ndarray:
    """Euclidean distance from interior points to the level surface.

    Solves the projection stationarity condition in the eigenbasis of P by
    bisection on the Lagrange multiplier, which is safeguarded: the residual
    is monotone on the bracket.  Accuracy ~1e-12 relative to the axes.
    """
    pts = np.atleast_2d(np.asarray(X, dtype=float))
    quad = ell.quad(pts)
    if np.any(quad > ell.level + _MEMBERSHIP_TOL):
        raise OutOfDomainError(
            "boundary distance is defined for points inside the ellipsoid"
        )
    axes2 = ell.level / ell.eigenvalues  # squared semi-axes, shape (n,)
    z = pts @ ell._evecs  # coordinates in the eigenbasis
    a_min2 = axes2.min()
    min_axis = axes2 <= a_min2 * (1.0 + 1e-12)

    # residual g(t) = sum_i z_i^2 a_i^2 / (a_i^2 + t)^2 - 1, decreasing in t
    def g(t):
        denom = axes2[None, :] + t[:, None]
        return ((z * axes2) ** 2 / denom**2 / axes2).sum(axis=1) - 1.0

    B = pts.shape[0]
    t_lo = np.full(B, -a_min2 * (1.0 - 1e-13))
    t_hi = np.zeros(B)
    bracketed = g(t_lo) >= 0.0

    t = np.zeros(B)
    lo = t_lo.copy()
    hi = t_hi.copy()
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        high = g(mid) > 0.0
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    t = 0.5 * (lo + hi)
    denom = axes2[None, :] + t[:, None]
    dist_reg = -t * np.sqrt((z**2 / denom**2).sum(axis=1))

    # Degenerate rows: no mass along the shortest axis and the residual never
    # reaches zero; the projection jumps onto the shortest-axis cap.
    dist = dist_reg
    if not np.all(bracketed):
        rows = ~bracketed
        zz = z[rows]
        nonmin = ~min_axis
        if nonmin.any():
            denom0 = axes2[nonmin] - a_min2
            xi = zz[:, nonmin] * axes2[nonmin] / denom0
            s2 = 1.0 - (xi**2 / axes2[nonmin]).sum(axis=1)
            s2 = np.maximum(s2, 0.0)
            d2 = ((xi - zz[:, nonmin]) ** 2).sum(axis=1)
            d2 = d2 + (zz[:, min_axis] ** 2).sum(axis=1)  # tiny residual mass
            cap = a_min2 * s2
            dist_deg = np.sqrt(d2 + cap)
        else:
            # isotropic P: distance is radius minus norm
            dist_deg = np.sqrt(a_min2) - np.linalg.norm(zz, axis=1)
        dist = np.where(bracketed, dist_reg, 0.0)
        dist[rows] = dist_deg
    return dist


def dist_to_ellipsoid_boundary(ell: EllipsoidSet, x) -> float:
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1:
        raise InvalidArgumentError("expected a single point; use boundary_distances")
    return float(boundary_distances(ell, xv[None, :])[0])


def erode_ellipsoid(ell: EllipsoidSet, w_bar: float) -> ErodedEllipsoid:
    """Shrink the level so every remaining point is >= w_bar from the boundary."""
    if w_bar < 0.0:
        raise InvalidArgumentError("erosion margin must be nonnegative")
    if w_bar == 0.0:
        return ErodedEllipsoid(base=ell, margin=0.0, eroded_level=ell.level)
    lam_max = float(ell.eigenvalues.max())
    max_margin = float(np.sqrt(ell.level / lam_max))
    if w_bar >= max_margin:
        raise EmptyErosionError(
            f"erosion margin {w_bar} empties the set; "
            f"maximum admissible margin is {max_margin:.9g}",
            max_margin=max_margin,
        )
    root = np.sqrt(ell.level) - w_bar * np.sqrt(lam_max)
    return ErodedEllipsoid(base=ell, margin=w_bar, eroded_level=float(root**2))


@dataclass(frozen=True)
class RciReport:
    n_runs: int
    exits: int
    max_level: float
    level_bound: float
    w_bar: float


def verify_rci(
    model: SystemModel,
    eroded: ErodedEllipsoid,
    K: np.ndarray,
    n_trials: int,
    horizon: float,
    w_bar: float | None = None,
    dt: float = 0.01,
    seed: int = 0,
) -> RciReport:
    """Monte Carlo invariance check of the base ellipsoid under u = -Kx.

    Starts trials on the boundary of the eroded set and simulates the
    perturbed closed loop twice per start: once with uniform disturbance
    draws and once with the sign-of-gradient adversarial policy.  Reports
    how many runs ever left the base set.
    """
    if n_trials < 1:
        raise InvalidArgumentError("n_trials must be positive")
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    if Km.shape != (model.m, model.n):
        raise InvalidArgumentError(f"gain must have shape ({model.m}, {model.n})")
    bound = eroded.margin if w_bar is None else float(w_bar)
    base = eroded.base
    starts = eroded.shrunk.boundary_points(n_trials, seed=seed)
    X = np.vstack([starts, starts])  # first half uniform, second adversarial
    adversarial = np.zeros(X.shape[0], dtype=bool)
    adversarial[n_trials:] = True

    rng = np.random.default_rng(seed)
    steps = int(np.ceil(horizon / dt))
    n_w = model.disturbance_dim
    max_level = float(base.quad(X).max())
    exited = np.zeros(X.shape[0], dtype=bool)
    eps = 1e-6
    for _ in range(steps):
        u = np.clip(-(X @ Km.T), model.input_set.lower, model.input_set.upper)
        w = rng.uniform(-bound, bound, size=(X.shape[0], n_w))
        # adversarial rows: push along the outward gradient of x'Px per channel
        grad = 2.0 * (X @ base.P)
        zero_w = np.zeros_like(w)
        f0 = model.rhs(X, u, zero_w)
        for j in range(n_w):
            probe = zero_w.copy()
            probe[:, j] = eps
            sensitivity = ((model.rhs(X, u, probe) - f0) / eps * grad).sum(axis=1)
            w_adv = bound * np.where(sensitivity >= 0.0, 1.0, -1.0)
            w[adversarial, j] = w_adv[adversarial]
        X = rk4_step(model.rhs, X, u, w, dt)
        level = base.quad(X)
        max_level = max(max_level, float(level.max()))
        exited |= level > base.level + 1e-9
    return RciReport(
        n_runs=X.shape[0],
        exits=int(exited.sum()),
        max_level=max_level,
        level_bound=base.level,
        w_bar=bound,
    )
