"""Low-discrepancy point sets over the state box and their discrepancy.

The generator is the plain (unscrambled) Halton sequence: point ``k`` is the
radical inverse of index ``start_index + k`` in the first ``dim`` prime bases.
That gives the prefix property the enrichment loop relies on: extending the
count extends the point list without reshuffling it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BoxSet
from .errors import InvalidArgumentError, UnsupportedDimensionError

HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

EXACT_DISCREPANCY_MAX_DIM = 2
EXACT_DISCREPANCY_MAX_N = 4096


@dataclass(frozen=True)
class GeneratorInfo:
    """Descriptor that fully determines a generated point set."""

    family: str
    dim: int
    start_index: int
    count: int

    @property
    def next_start_index(self) -> int:
        return self.start_index + self.count


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray
    domain: BoxSet
    generator: GeneratorInfo

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise InvalidArgumentError("sample points do not match the domain dimension")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    idx = indices.copy()
    out = np.zeros(idx.shape, dtype=float)
    denom = 1.0
    while idx.max(initial=0) > 0:
        denom *= base
        out += (idx % base) / denom
        idx //= base
    return out


def halton(count: int, dim: int, start_index: int = 1) -> np.ndarray:
    """Halton points in [0, 1)^dim, indices start_index .. start_index+count-1.

    Supports dim <= 12 (one prime base per axis).  Deterministic; the result
    for a larger count extends the result for a smaller one.
    """
    if count < 1:
        raise InvalidArgumentError("count must be positive")
    if dim < 1:
        raise InvalidArgumentError("dim must be positive")
    if start_index < 0:
        raise InvalidArgumentError("start_index must be nonnegative")
    if dim > len(HALTON_PRIMES):
        raise UnsupportedDimensionError(
            f"halton supports dim <= {len(HALTON_PRIMES)}, got {dim}"
        )
    indices = np.arange(start_index, start_index + count, dtype=np.int64)
    cols = [_radical_inverse(indices, HALTON_PRIMES[d]) for d in range(dim)]
    return np.stack(cols, axis=1)


def scale_to_box(points: np.ndarray, domain: BoxSet) -> np.ndarray:
    """Affine map of unit-cube points onto the box (corners to corners)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != domain.dim:
        raise InvalidArgumentError(
            f"points have dimension {pts.shape[-1] if pts.ndim else 0}, "
            f"domain has {domain.dim}"
        )
    return domain.lower + pts * (domain.upper - domain.lower)


def unscale_from_box(points: np.ndarray, domain: BoxSet) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return (pts - domain.lower) / (domain.upper - domain.lower)


def halton_sample_set(count: int, domain: BoxSet, start_index: int = 1) -> SampleSet:
    """Halton points scaled onto the domain box, with their descriptor."""
    unit = halton(count, domain.dim, start_index)
    return SampleSet(
        points=scale_to_box(unit, domain),
        domain=domain,
        generator=GeneratorInfo("halton", domain.dim, start_index, count),
    )


@dataclass(frozen=True)
class DiscrepancyResult:
    value: float
    exact: bool


def _exact_star_discrepancy(unit: np.ndarray) -> float:
    # Enumerate anchored boxes with corners on sample coordinates (plus 1.0).
    # For each corner the supremum is approached either from below (open
    # count, full volume) or from above (closed count, same volume).
    n, dim = unit.shape
    if dim == 1:
        xs = np.sort(unit[:, 0])
        corners = np.append(np.unique(xs), 1.0)
        opened = np.searchsorted(xs, corners, side="left")
        closed = np.searchsorted(xs, corners, side="right")
        under = corners - opened / n
        over = closed / n - corners
        return float(max(under.max(), over.max(), 0.0))

    order = np.argsort(unit[:, 0], kind="stable")
    xs = unit[order, 0]
    ys = unit[order, 1]
    x_corners = np.append(np.unique(xs), 1.0)
    y_corners = np.append(np.unique(unit[:, 1]), 1.0)
    best = 0.0
    for a in x_corners:
        n_open_x = int(np.searchsorted(xs, a, side="left"))
        n_closed_x = int(np.searchsorted(xs, a, side="right"))
        ys_open = np.sort(ys[:n_open_x])
        ys_closed = np.sort(ys[:n_closed_x])
        opened = np.searchsorted(ys_open, y_corners, side="left")
        closed = np.searchsorted(ys_closed, y_corners, side="right")
        vol = a * y_corners
        under = (vol - opened / n).max()
        over = (closed / n - vol).max()
        best = max(best, under, over)
    return float(best)


def _estimated_star_discrepancy(unit: np.ndarray, n_boxes: int, seed: int) -> float:
    n, dim = unit.shape
    rng = np.random.default_rng(seed)
    best = 0.0
    chunk = 2048
    remaining = n_boxes
    while remaining > 0:
        take = min(chunk, remaining)
        corners = rng.uniform(0.0, 1.0, size=(take, dim))
        inside = (unit[None, :, :] < corners[:, None, :]).all(axis=2)
        frac = inside.sum(axis=1) / n
        vol = corners.prod(axis=1)
        best = max(best, float(np.abs(frac - vol).max()))
        remaining -= take
    return best


def star_discrepancy(
    samples: SampleSet | np.ndarray,
    domain: BoxSet | None = None,
    mode: str = "auto",
    n_boxes: int = 100_000,
    seed: int = 0,
) -> DiscrepancyResult:
    """Star discrepancy of the point set, rescaled to the unit cube.

    Exact enumeration is available for dim <= 2 and N <= 4096; otherwise a
    seeded Monte Carlo scan over anchored boxes gives a lower bound and the
    result is flagged ``exact=False``.
    """
    if isinstance(samples, SampleSet):
        unit = unscale_from_box(samples.points, samples.domain)
    else:
        pts = np.asarray(samples, dtype=float)
        if pts.ndim != 2:
            raise InvalidArgumentError("expected a 2-D array of points")
        unit = unscale_from_box(pts, domain) if domain is not None else pts
    if unit.shape[0] == 0:
        raise InvalidArgumentError("discrepancy of an empty point set is undefined")
    if np.any(unit < -1e-12) or np.any(unit > 1.0 + 1e-12):
        raise InvalidArgumentError("points fall outside the declared domain")

    n, dim = unit.shape
    can_exact = dim <= EXACT_DISCREPANCY_MAX_DIM and n <= EXACT_DISCREPANCY_MAX_N
    if mode == "auto":
        mode = "exact" if can_exact else "estimate"
    if mode == "exact":
        if not can_exact:
            raise InvalidArgumentError(
                "exact discrepancy is limited to dim <= "
                f"{EXACT_DISCREPANCY_MAX_DIM} and N <= {EXACT_DISCREPANCY_MAX_N}"
            )
        return DiscrepancyResult(_exact_star_discrepancy(unit), exact=True)
    if mode == "estimate":
        return DiscrepancyResult(
            _estimated_star_discrepancy(unit, n_boxes, seed), exact=False
        )
    raise InvalidArgumentError(f"unknown discrepancy mode '{mode}'")
