"""Controlled nonlinear ODE systems with box constraints.

Models are immutable descriptions of ``xdot = rhs(x, u, w)`` together with the
state box, the input box and the disturbance bound.  The right-hand side must
be vectorized: it receives arrays shaped ``(..., n)``, ``(..., m)``,
``(..., n_w)`` and returns ``(..., n)``, so a single code path serves both
one-off integrations and the batched rollouts the feasibility oracle issues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, InvalidArgumentError

RhsFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_SEGMENT_TOL = 1e-9


def _as_vector(x, length: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != length:
        raise InvalidArgumentError(
            f"{name} has dimension {arr.shape[-1]}, expected {length}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned box {x : lower <= x <= upper} with 0 in its interior."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidArgumentError("box bounds must be 1-D and equal length")
        if not np.all(lo < hi):
            raise InvalidArgumentError("box requires lower < upper componentwise")
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise InvalidArgumentError("box must contain the origin in its interior")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Membership for a single point or a batch; closed box with tolerance."""
        pts = np.asarray(points, dtype=float)
        inside = (pts >= self.lower - tol) & (pts <= self.upper + tol)
        return inside.all(axis=-1)

    def clip(self, points: np.ndarray) -> np.ndarray:
        return np.clip(points, self.lower, self.upper)

    def violation(self, points: np.ndarray) -> np.ndarray:
        """Largest componentwise distance out of the box; 0 inside."""
        pts = np.asarray(points, dtype=float)
        over = np.maximum(pts - self.upper, self.lower - pts)
        return np.maximum(over.max(axis=-1), 0.0)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Perturbed control system xdot = rhs(x, u, w) with constraint boxes.

    ``rhs`` with ``w = 0`` is the nominal field.  ``disturbance_bound`` is the
    componentwise bound on ``w`` (infinity norm on the disturbance box).
    """

    n: int
    m: int
    rhs: RhsFn
    state_set: BoxSet
    input_set: BoxSet
    disturbance_bound: float = 0.0
    disturbance_dim: int = 1
    name: str = "custom"

    def __post_init__(self):
        if self.state_set.dim != self.n:
            raise InvalidArgumentError("state_set dimension does not match n")
        if self.input_set.dim != self.m:
            raise InvalidArgumentError("input_set dimension does not match m")
        if self.disturbance_bound < 0.0:
            raise InvalidArgumentError("disturbance_bound must be nonnegative")
        origin = self.rhs(
            np.zeros(self.n), np.zeros(self.m), np.zeros(self.disturbance_dim)
        )
        if not np.allclose(origin, 0.0, atol=1e-12):
            raise InvalidArgumentError(
                "rhs(0, 0, 0) must vanish: the origin is the design equilibrium"
            )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution: strictly increasing times and matching states."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise InvalidArgumentError("trajectory times/states shapes disagree")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidArgumentError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Piecewise-constant signal: one value row per segment duration."""

    values: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        dur = np.atleast_1d(np.asarray(self.durations, dtype=float))
        if vals.shape[0] != dur.shape[0]:
            raise InvalidArgumentError("one duration per signal segment required")
        if np.any(dur <= 0.0):
            raise InvalidArgumentError("segment durations must be positive")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "durations", dur)

    @classmethod
    def constant(cls, value, duration: float) -> "PiecewiseConstant":
        return cls(np.atleast_2d(np.asarray(value, dtype=float)), np.array([duration]))

    @classmethod
    def uniform(cls, values, total_duration: float) -> "PiecewiseConstant":
        """Equal-length segments covering [0, total_duration]."""
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        seg = total_duration / vals.shape[0]
        return cls(vals, np.full(vals.shape[0], seg))

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())


def eval_rhs(model: SystemModel, x, u, w=None) -> np.ndarray:
    """Evaluate the vector field at (x, u, w); w=None means nominal (w=0).

    A disturbance exceeding the model's bound is legal input (the bound is an
    assumption, not a domain restriction) and only triggers a warning.
    """
    xv = _as_vector(x, model.n, "state")
    uv = _as_vector(u, model.m, "input")
    if w is None:
        wv = np.zeros(xv.shape[:-1] + (model.disturbance_dim,))
    else:
        wv = _as_vector(w, model.disturbance_dim, "disturbance")
        if np.any(np.abs(wv) > model.disturbance_bound + 1e-12):
            warnings.warn(
                "disturbance exceeds the model bound "
                f"{model.disturbance_bound}; evaluating anyway",
                stacklevel=2,
            )
    return model.rhs(xv, uv, wv)


def rk4_step(rhs: RhsFn, x: np.ndarray, u: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step, batched over leading axes."""
    k1 = rhs(x, u, w)
    k2 = rhs(x + (0.5 * dt) * k1, u, w)
    k3 = rhs(x + (0.5 * dt) * k2, u, w)
    k4 = rhs(x + dt * k3, u, w)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps_per_segment(durations: np.ndarray, dt: float) -> np.ndarray:
    steps = np.rint(durations / dt).astype(int)
    if np.any(steps < 1) or np.any(
        np.abs(durations - steps * dt) > _SEGMENT_TOL * np.maximum(1.0, steps)
    ):
        raise InvalidArgumentError(
            "dt must divide every signal segment length (within rounding tolerance)"
        )
    return steps


def _per_step_values(signal: PiecewiseConstant, dt: float, n_steps: int, width: int) -> np.ndarray:
    vals = signal.values
    if vals.shape[1] != width:
        raise InvalidArgumentError(
            f"signal width {vals.shape[1]} does not match expected {width}"
        )
    steps = _steps_per_segment(signal.durations, dt)
    expanded = np.repeat(vals, steps, axis=0)
    if expanded.shape[0] < n_steps:
        raise InvalidArgumentError("signal does not cover the integration horizon")
    return expanded[:n_steps]


def integrate(
    model: SystemModel,
    x0,
    control: PiecewiseConstant,
    disturbance: PiecewiseConstant | None,
    T: float,
    dt: float,
) -> Trajectory:
    """Fixed-step RK4 integration under piecewise-constant signals.

    Deterministic for fixed inputs.  Raises :class:`DivergenceError` naming
    the first time at which the state became non-finite.
    """
    if T <= 0.0 or dt <= 0.0:
        raise InvalidArgumentError("T and dt must be positive")
    x = _as_vector(x0, model.n, "x0").astype(float)
    n_steps = int(np.rint(T / dt))
    if n_steps < 1 or abs(T - n_steps * dt) > _SEGMENT_TOL * max(1, n_steps):
        raise InvalidArgumentError("dt must divide the horizon T")
    u_steps = _per_step_values(control, dt, n_steps, model.m)
    if disturbance is None:
        w_steps = np.zeros((n_steps, model.disturbance_dim))
    else:
        w_steps = _per_step_values(disturbance, dt, n_steps, model.disturbance_dim)

    states = np.empty((n_steps + 1, model.n))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = rk4_step(model.rhs, x, u_steps[k], w_steps[k], dt)
            if not np.all(np.isfinite(x)):
                t_blow = (k + 1) * dt
                raise DivergenceError(
                    f"state became non-finite at t = {t_blow:.6g}", time=t_blow
                )
            states[k + 1] = x
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times=times, states=states)


# --- benchmark system ------------------------------------------------------

CART_SPRING_MASS = 1.8
CART_SPRING_K0 = 1.2
CART_SPRING_HD = 0.25


def _cart_spring_rhs(x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    x1 = x[..., 0]
    x2 = x[..., 1]
    dx2 = (
        -(CART_SPRING_K0 / CART_SPRING_MASS) * np.exp(-x1) * x1
        - (CART_SPRING_HD / CART_SPRING_MASS) * x2
        + u[..., 0] / CART_SPRING_MASS
        + w[..., 0]
    )
    return np.stack([x2, dx2], axis=-1)


def make_cart_spring() -> SystemModel:
    """Cart on a nonlinear spring with damping; the benchmark system.

    Two states (position, velocity), one input, one additive disturbance on
    the velocity equation, |x| <= 2 componentwise, |u| <= 3, |w| <= 0.01.
    """
    return SystemModel(
        n=2,
        m=1,
        rhs=_cart_spring_rhs,
        state_set=BoxSet(np.array([-2.0, -2.0]), np.array([2.0, 2.0])),
        input_set=BoxSet(np.array([-3.0]), np.array([3.0])),
        disturbance_bound=0.01,
        disturbance_dim=1,
        name="cart_spring",
    )


MODEL_REGISTRY: dict[str, Callable[[], SystemModel]] = {
    "cart_spring": make_cart_spring,
}


def get_model(name: str) -> SystemModel:
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise InvalidArgumentError(f"unknown model '{name}' (known: {known})") from None
    return factory()
