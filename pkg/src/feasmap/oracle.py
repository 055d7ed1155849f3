"""Feasibility oracle for the finite-horizon constrained control problem.

A state is feasible when some admissible piecewise-constant input keeps the
trajectory in the state box for the whole horizon and lands the final state
in the terminal ellipsoid.  The oracle solves the phase-1 form: minimize the
worst constraint violation over the horizon (inputs are admissible by
construction, clamped into the input box), certify +1 when the best violation
falls below ``feas_tol``.  The contract is one-sided: +1 comes with an explicit
admissible control that can be replayed, while -1 may be a solver false
negative.

The solver is a deterministic multistart adaptive coordinate descent.  All
restarts of all queried states advance in lockstep as rows of one batch, so
labeling a dataset is a handful of vectorized rollouts rather than millions
of scalar ones; per-row arithmetic is independent of the batch composition,
which makes labels identical for any worker count or chunk size.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import SystemModel, make_cart_spring, rk4_step
from .errors import InvalidArgumentError, OutOfDomainError
from .sampling import GeneratorInfo, SampleSet, halton_sample_set
from .setgeom import EllipsoidSet

_CHUNK = 256  # samples per batch; fixed so results never depend on workers
_MIN_STEP_FRAC = 1e-3
_MAX_SWEEPS = 60

# Benchmark cost/terminal parameters for the cart-spring system.  P and K
# are a matched pair: u = -Kx satisfies the terminal decrease condition and
# the input bound on every level set with level in (0, 1), which
# verify_terminal_assumptions re-checks numerically.
CART_SPRING_P = np.array([[5.0511, 2.2731], [2.2731, 2.4586]])
CART_SPRING_K = np.array([[4.2291, 4.8551]])
CART_SPRING_Q = np.eye(2)
CART_SPRING_R = np.array([[0.1]])


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """Everything that defines one feasibility problem instance."""

    model: SystemModel
    horizon_T: float
    segments: int
    steps_per_segment: int
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    mu: float
    feas_tol: float = 1e-6
    restarts: int = 5
    feedback_gain: np.ndarray | None = None  # seeds one restart when present
    mu_effective: float | None = None  # eroded terminal level for robust labeling

    def __post_init__(self):
        if self.horizon_T <= 0.0:
            raise InvalidArgumentError("horizon_T must be positive")
        if self.segments < 1 or self.steps_per_segment < 1:
            raise InvalidArgumentError("transcription sizes must be positive")
        if not 0.0 < self.mu < 1.0:
            raise InvalidArgumentError("mu must lie in (0, 1)")
        if self.feas_tol <= 0.0:
            raise InvalidArgumentError("feas_tol must be positive")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be positive")
        P = np.asarray(self.P, dtype=float)
        EllipsoidSet(P, self.mu)  # validates symmetry and positive definiteness
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        if self.feedback_gain is not None:
            K = np.atleast_2d(np.asarray(self.feedback_gain, dtype=float))
            if K.shape != (self.model.m, self.model.n):
                raise InvalidArgumentError("feedback gain shape must be (m, n)")
            object.__setattr__(self, "feedback_gain", K)
        if self.mu_effective is not None and not 0.0 < self.mu_effective <= self.mu:
            raise InvalidArgumentError("mu_effective must lie in (0, mu]")

    @property
    def dt(self) -> float:
        return self.horizon_T / (self.segments * self.steps_per_segment)

    @property
    def terminal_level(self) -> float:
        return self.mu if self.mu_effective is None else self.mu_effective


def cart_spring_ocp(
    horizon_T: float = 1.0,
    mu: float = 0.5,
    segments: int = 10,
    steps_per_segment: int = 10,
    feas_tol: float = 1e-6,
    restarts: int = 5,
    mu_effective: float | None = None,
) -> OcpSpec:
    """Feasibility problem for the cart-and-spring benchmark."""
    return OcpSpec(
        model=make_cart_spring(),
        horizon_T=horizon_T,
        segments=segments,
        steps_per_segment=steps_per_segment,
        Q=CART_SPRING_Q,
        R=CART_SPRING_R,
        P=CART_SPRING_P,
        mu=mu,
        feas_tol=feas_tol,
        restarts=restarts,
        feedback_gain=CART_SPRING_K,
        mu_effective=mu_effective,
    )


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    label: int
    violation: float
    control: np.ndarray  # (segments, m), admissible by construction
    restarts_used: int
    diverged: bool = False


@dataclass(frozen=True, eq=False)
class LabeledSample:
    state: np.ndarray
    label: int
    violation: float


@dataclass(frozen=True, eq=False)
class LabelingResult:
    """Ordered labels plus the degenerate-classes warning flag."""

    samples: list
    degenerate: bool

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, idx):
        return self.samples[idx]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    @property
    def positive_count(self) -> int:
        return int((self.labels == 1).sum())


def _batch_violations(spec: OcpSpec, x0: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Phase-1 objective for rows of (initial state, control matrix).

    Runs the shared RK4 stepper and accumulates the running maximum of the
    state-box violation; adds the terminal-ellipsoid violation at the end.
    Rows that go non-finite get +inf.
    """
    model = spec.model
    dt = spec.dt
    box = model.state_set
    w = np.zeros((x0.shape[0], model.disturbance_dim))
    x = x0
    viol = box.violation(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(spec.segments):
            u = controls[:, s, :]
            for _ in range(spec.steps_per_segment):
                x = rk4_step(model.rhs, x, u, w, dt)
                viol = np.maximum(viol, box.violation(x))
    quad = ((x @ spec.P) * x).sum(axis=1)
    viol = np.maximum(viol, quad - spec.terminal_level)
    viol = np.maximum(viol, 0.0)
    bad = ~(np.isfinite(viol) & np.isfinite(x).all(axis=1))
    if bad.any():
        viol = np.where(bad, np.inf, viol)
    return viol


def _feedback_seed(spec: OcpSpec, x0: np.ndarray) -> np.ndarray:
    """Segmentwise zero-order hold of the clamped linear feedback -Kx."""
    model = spec.model
    K = spec.feedback_gain
    lo, hi = model.input_set.lower, model.input_set.upper
    x = x0
    w = np.zeros((x0.shape[0], model.disturbance_dim))
    seed = np.empty((x0.shape[0], spec.segments, model.m))
    for s in range(spec.segments):
        u = np.clip(-(x @ K.T), lo, hi)
        seed[:, s, :] = u
        for _ in range(spec.steps_per_segment):
            x = rk4_step(model.rhs, x, u, w, spec.dt)
    return seed


def _extended_radical_seeds(count: int, dim: int) -> np.ndarray:
    # Internal low-discrepancy seeds over the control hypercube; unlike the
    # public sampler this one is not capped at 12 axes (bases repeat the
    # prime list with index offsets past the table).
    from .sampling import HALTON_PRIMES, _radical_inverse

    idx = np.arange(1, count + 1, dtype=np.int64)
    cols = []
    for d in range(dim):
        base = HALTON_PRIMES[d % len(HALTON_PRIMES)]
        cols.append(_radical_inverse(idx + 17 * (d // len(HALTON_PRIMES)), base))
    return np.stack(cols, axis=1)


def _seed_controls(spec: OcpSpec, x0: np.ndarray) -> np.ndarray:
    """Per-sample restart seeds, shape (N, restarts, segments, m)."""
    model = spec.model
    N = x0.shape[0]
    R = spec.restarts
    seeds = np.zeros((N, R, spec.segments, model.m))
    next_slot = 1
    if R > 1 and spec.feedback_gain is not None:
        seeds[:, 1] = _feedback_seed(spec, x0)
        next_slot = 2
    n_free = R - next_slot
    if n_free > 0:
        unit = _extended_radical_seeds(n_free, spec.segments * model.m)
        lo, hi = model.input_set.lower, model.input_set.upper
        flat = lo + unit.reshape(n_free, spec.segments, model.m) * (hi - lo)
        seeds[:, next_slot:] = flat[None, :, :, :]
    return seeds


def _refine_batch(
    spec: OcpSpec,
    x0: np.ndarray,
    max_sweeps: int = _MAX_SWEEPS,
    min_step_frac: float = _MIN_STEP_FRAC,
) -> tuple[np.ndarray, np.ndarray]:
    """Multistart coordinate descent for a batch of initial states.

    Returns (best violation per sample, best control per sample).  Each
    restart row adapts its own step size; a sample retires as soon as any of
    its restarts certifies feasibility, since further refinement cannot
    change the label.
    """
    model = spec.model
    N = x0.shape[0]
    R = spec.restarts
    S = spec.segments
    m = model.m
    tol = spec.feas_tol
    lo, hi = model.input_set.lower, model.input_set.upper
    halfwidth = model.input_set.halfwidth  # (m,)

    controls = _seed_controls(spec, x0).reshape(N * R, S, m)
    X0 = np.repeat(x0, R, axis=0)
    best = _batch_violations(spec, X0, controls)

    step_frac = np.full(N * R, 0.5)
    certified = best.reshape(N, R).min(axis=1) <= tol
    active = ~np.repeat(certified, R) & (best > tol)
    for _ in range(max_sweeps):
        if not active.any():
            break
        improved = np.zeros(N * R, dtype=bool)
        for s in range(S):
            for c in range(m):
                for sign in (1.0, -1.0):
                    idx = np.flatnonzero(active)
                    if idx.size == 0:
                        break
                    cand = controls[idx].copy()
                    moved = cand[:, s, c] + sign * step_frac[idx] * halfwidth[c]
                    cand[:, s, c] = np.clip(moved, lo[c], hi[c])
                    viol = _batch_violations(spec, X0[idx], cand)
                    gain = viol < best[idx]
                    rows = idx[gain]
                    controls[rows, s, c] = cand[gain, s, c]
                    best[rows] = viol[gain]
                    improved[rows] = True
                    newly = best.reshape(N, R).min(axis=1) <= tol
                    if newly.any():
                        active &= ~np.repeat(newly, R)
        shrink = active & ~improved
        step_frac[shrink] *= 0.5
        active &= step_frac >= min_step_frac
    per_sample = best.reshape(N, R)
    winner = per_sample.argmin(axis=1)
    best_v = per_sample[np.arange(N), winner]
    best_u = controls.reshape(N, R, S, m)[np.arange(N), winner]
    return best_v, best_u


def solve_feasibility(spec: OcpSpec, x0) -> FeasibilityResult:
    """Label one initial state; +1 is certified by the returned control."""
    x = np.asarray(x0, dtype=float)
    if x.shape != (spec.model.n,):
        raise InvalidArgumentError(
            f"initial state must have shape ({spec.model.n},)"
        )
    if not spec.model.state_set.contains(x):
        raise OutOfDomainError("initial state lies outside the state box")
    best_v, best_u = _refine_batch(spec, x[None, :])
    violation = float(best_v[0])
    diverged = not np.isfinite(violation)
    return FeasibilityResult(
        label=1 if violation <= spec.feas_tol else -1,
        violation=violation,
        control=best_u[0],
        restarts_used=spec.restarts,
        diverged=diverged,
    )


def _label_chunk(spec: OcpSpec, points: np.ndarray) -> np.ndarray:
    return _refine_batch(spec, points)[0]


def _label_points(spec: OcpSpec, points: np.ndarray, parallelism: int) -> list:
    chunks = [points[i : i + _CHUNK] for i in range(0, points.shape[0], _CHUNK)]
    if parallelism > 1 and len(chunks) > 1:
        workers = min(parallelism, len(chunks), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_label_chunk, [spec] * len(chunks), chunks))
    else:
        results = [_label_chunk(spec, chunk) for chunk in chunks]
    out = []
    for chunk, viols in zip(chunks, results):
        for x, v in zip(chunk, viols):
            value = float(v)
            out.append(
                LabeledSample(
                    state=x.copy(),
                    label=1 if value <= spec.feas_tol else -1,
                    violation=value,
                )
            )
    return out


def label_dataset(
    spec: OcpSpec, samples: SampleSet, parallelism: int = 1
) -> LabelingResult:
    """Label every sample; order matches the input regardless of scheduling."""
    points = samples.points
    if points.shape[0] == 0:
        raise InvalidArgumentError("cannot label an empty sample set")
    if not np.all(spec.model.state_set.contains(points)):
        raise OutOfDomainError("samples must lie inside the state box")
    out = _label_points(spec, points, parallelism)
    degenerate = len({s.label for s in out}) < 2
    if degenerate:
        warnings.warn(
            "labeling produced a single class; downstream training will fail",
            stacklevel=2,
        )
    return LabelingResult(samples=out, degenerate=degenerate)


@dataclass(frozen=True, eq=False)
class EnrichmentResult:
    added: list
    cap_exceeded: bool
    generator: GeneratorInfo


def enrich_feasible(
    spec: OcpSpec,
    existing: LabelingResult | list,
    target_positive: int,
    generator: GeneratorInfo,
    parallelism: int = 1,
    batch: int = 64,
) -> EnrichmentResult:
    """Extend the sample sequence until enough feasible points are known.

    Continues the Halton sequence from the descriptor's next index, keeps
    only +1 points, and gives up (flagging ``cap_exceeded``) after examining
    ten times the number of missing positives.
    """
    current = [s for s in existing]
    have = sum(1 for s in current if s.label == 1)
    missing = target_positive - have
    if missing <= 0:
        return EnrichmentResult(added=[], cap_exceeded=False, generator=generator)
    if generator.family != "halton":
        raise InvalidArgumentError("enrichment requires a halton generator descriptor")
    domain = spec.model.state_set
    cap = 10 * missing
    examined = 0
    start = generator.next_start_index
    added: list = []
    while len(added) < missing and examined < cap:
        take = min(batch, cap - examined)
        fresh = halton_sample_set(take, domain, start_index=start)
        labeled = _label_points(spec, fresh.points, parallelism)
        for s in labeled:
            if s.label == 1 and len(added) < missing:
                added.append(s)
        examined += take
        start += take
    return EnrichmentResult(
        added=added,
        cap_exceeded=len(added) < missing,
        generator=GeneratorInfo(
            generator.family, generator.dim, generator.start_index,
            start - generator.start_index,
        ),
    )


@dataclass(frozen=True)
class TerminalCheckReport:
    n_samples: int
    pass_fraction: float
    max_decrease_residual: float
    input_violations: int
    max_input_excess: float
    tol: float


def verify_terminal_assumptions(
    spec: OcpSpec,
    K: np.ndarray,
    n_samples: int = 2000,
    tol: float = 1e-9,
    seed: int = 0,
) -> TerminalCheckReport:
    """Sampled check of the terminal-set decrease condition under u = -Kx.

    At points of the terminal ellipsoid, tests (i) the continuous-time
    decrease  2 x'P f(x, -Kx) + x'Qx + (Kx)'R(Kx) <= tol  and (ii) input
    admissibility -Kx in U.  Report-only; nothing is raised on failure.
    """
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    if Km.shape != (spec.model.m, spec.model.n):
        raise InvalidArgumentError("gain must have shape (m, n)")
    ell = EllipsoidSet(spec.P, spec.mu)
    interior = ell.sample_inside(max(n_samples - n_samples // 4, 1), seed=seed)
    rim = ell.boundary_points(n_samples - interior.shape[0], seed=seed + 1)
    X = np.vstack([interior, rim])
    u = -(X @ Km.T)
    w = np.zeros((X.shape[0], spec.model.disturbance_dim))
    f = spec.model.rhs(X, u, w)
    decrease = (
        2.0 * ((X @ spec.P) * f).sum(axis=1)
        + ((X @ spec.Q) * X).sum(axis=1)
        + ((u @ spec.R) * u).sum(axis=1)
    )
    lo, hi = spec.model.input_set.lower, spec.model.input_set.upper
    excess = np.maximum(u - hi, lo - u).max(axis=1)
    ok = (decrease <= tol) & (excess <= 0.0)
    return TerminalCheckReport(
        n_samples=X.shape[0],
        pass_fraction=float(ok.mean()),
        max_decrease_residual=float(decrease.max()),
        input_violations=int((excess > 0.0).sum()),
        max_input_excess=float(max(excess.max(), 0.0)),
        tol=tol,
    )
