"""Gaussian-kernel soft-margin SVM trained by sequential minimal optimization.

The dual problem

    min_a  0.5 * sum_ik a_i a_k y_i y_k K(x_i, x_k) - sum_k a_k
    s.t.   sum_k a_k y_k = 0,   0 <= a_k <= L

is solved by SMO with second-order working-pair selection: the first index
maximizes the KKT violation, the second minimizes the analytic two-variable
objective decrease among admissible partners.  Pair updates move along the
equality-feasible direction, so the equality constraint holds to rounding and
the box constraints hold exactly by clipping.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError

DEFAULT_CACHE_BYTES = 256 * 1024 * 1024


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel K(a, b) = exp(-|a - b|^2 / (2 sigma^2))."""

    sigma: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise InvalidArgumentError(f"unsupported kernel family '{self.family}'")
        if not self.sigma > 0.0:
            raise InvalidArgumentError("kernel sigma must be positive")


@dataclass(frozen=True)
class TrainConfig:
    regularization_L: float
    kkt_tol: float = 1e-3
    max_passes: int = 200_000
    seed: int = 0
    cache_bytes: int = DEFAULT_CACHE_BYTES

    def __post_init__(self):
        if not self.regularization_L > 0.0:
            raise InvalidArgumentError("regularization_L must be positive")
        if not self.kkt_tol > 0.0:
            raise InvalidArgumentError("kkt_tol must be positive")
        if self.max_passes < 1:
            raise InvalidArgumentError("max_passes must be positive")


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Trained decision function phi(x) = sum_k a_k y_k K(x_k, x) + bias.

    Only support vectors (a_k > 0) are stored; dropped terms contribute
    nothing to either the decision function or the dual equality constraint.
    """

    support_points: np.ndarray
    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    kernel: KernelSpec
    regularization_L: float
    training_size: int
    kkt_tol: float = 1e-3
    converged: bool = True

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.support_points, dtype=float))
        a = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        y = np.atleast_1d(np.asarray(self.labels, dtype=float))
        if not (pts.shape[0] == a.shape[0] == y.shape[0]):
            raise InvalidArgumentError("support points, alphas, labels must align")
        if np.any(a < 0.0) or np.any(a > self.regularization_L):
            raise InvalidArgumentError("alphas must lie in [0, L]")
        # The dual equality sum is a property of *trained* models; hand-built
        # surrogates (single support vector, bias-only) legitimately skip it.
        object.__setattr__(self, "support_points", pts)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "labels", y)

    @property
    def dim(self) -> int:
        return self.support_points.shape[1]

    @property
    def n_support(self) -> int:
        return self.support_points.shape[0]


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if av.shape != bv.shape:
        raise InvalidArgumentError("kernel arguments must share a dimension")
    d2 = float(((av - bv) ** 2).sum())
    return float(np.exp(-d2 / (2.0 * kernel.sigma**2)))


def kernel_matrix(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Cross-kernel matrix K[i, j] = K(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError("kernel arguments must share a dimension")
    # |a-b|^2 computed stably via broadcasting; N here is small enough that
    # the expansion trick's cancellation error is not worth risking.
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * kernel.sigma**2))


class _KernelRowCache:
    """LRU cache of Gram rows with a byte budget (full Gram is optional)."""

    def __init__(self, kernel: KernelSpec, X: np.ndarray, budget_bytes: int):
        self._kernel = kernel
        self._X = X
        n = X.shape[0]
        row_bytes = max(n * 8, 1)
        self._max_rows = max(2, budget_bytes // row_bytes)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d2 = ((self._X - self._X[i]) ** 2).sum(axis=1)
        row = np.exp(-d2 / (2.0 * self._kernel.sigma**2))
        self._rows[i] = row
        if len(self._rows) > self._max_rows:
            self._rows.popitem(last=False)
        return row


def _split_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([np.asarray(s.state, dtype=float) for s in data])
    y = np.array([float(s.label) for s in data])
    if np.any(np.abs(y) != 1.0):
        raise InvalidArgumentError("labels must be +1 or -1")
    return X, y


def train(data, kernel: KernelSpec, cfg: TrainConfig) -> SvmModel:
    """Solve the dual QP on labeled samples and assemble the model.

    Stops when the maximal KKT violation drops below ``cfg.kkt_tol``;
    exceeding ``cfg.max_passes`` pair updates yields a best-effort model
    flagged ``converged=False``.  Selection ties break on the lowest index,
    so training is deterministic for a fixed data order.
    """
    if len(data) < 2:
        raise InvalidArgumentError("training needs at least two samples")
    X, y = _split_arrays(data)
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateDataError(
            "single-class data: the dual equality constraint forces alpha = 0"
        )
    n = X.shape[0]
    L = float(cfg.regularization_L)
    cache = _KernelRowCache(kernel, X, cfg.cache_bytes)
    diag = np.ones(n)  # gaussian kernel: K(x, x) = 1

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0
    tau = 1e-12
    converged = False
    for _ in range(cfg.max_passes):
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < L)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < L))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        g_max = neg_yg[i]
        g_min = float(np.where(low, neg_yg, np.inf).min())
        if g_max - g_min <= cfg.kkt_tol:
            converged = True
            break

        row_i = cache.row(i)
        quad = diag[i] + diag - 2.0 * row_i
        np.maximum(quad, tau, out=quad)
        gain = g_max - neg_yg
        obj = np.where(low & (neg_yg < g_max), -(gain**2) / quad, np.inf)
        j = int(np.argmin(obj))

        row_j = cache.row(j)
        q_ij = max(diag[i] + diag[j] - 2.0 * row_i[j], tau)
        a_i, a_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / q_ij
            diff = a_i - a_j
            a_i += delta
            a_j += delta
            if diff > 0.0:
                if a_j < 0.0:
                    a_j = 0.0
                    a_i = diff
                if a_i > L:
                    a_i = L
                    a_j = L - diff
            else:
                if a_i < 0.0:
                    a_i = 0.0
                    a_j = -diff
                if a_j > L:
                    a_j = L
                    a_i = L + diff
        else:
            delta = (grad[i] - grad[j]) / q_ij
            total = a_i + a_j
            a_i -= delta
            a_j += delta
            if total > L:
                if a_i > L:
                    a_i = L
                    a_j = total - L
                if a_j > L:
                    a_j = L
                    a_i = total - L
            else:
                if a_j < 0.0:
                    a_j = 0.0
                    a_i = total
                if a_i < 0.0:
                    a_i = 0.0
                    a_j = total

        d_i = a_i - alpha[i]
        d_j = a_j - alpha[j]
        alpha[i] = a_i
        alpha[j] = a_j
        grad += y * (row_i * (y[i] * d_i) + row_j * (y[j] * d_j))

    bias = _compute_bias(alpha, y, grad, L)
    support = alpha > 0.0
    return SvmModel(
        support_points=X[support],
        alphas=alpha[support],
        labels=y[support],
        bias=bias,
        kernel=kernel,
        regularization_L=L,
        training_size=n,
        kkt_tol=cfg.kkt_tol,
        converged=converged,
    )


def _compute_bias(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, L: float) -> float:
    # For every index, -y*grad equals y_k - sum_j a_j y_j K(x_j, x_k), the
    # bias that would make point k sit exactly on its margin.
    target = -y * grad
    free = (alpha > 0.0) & (alpha < L)
    if free.any():
        return float(target[free].mean())
    up = ((y > 0) & (alpha < L)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < L))
    hi = float(np.where(up, target, -np.inf).max()) if up.any() else 0.0
    lo = float(np.where(low, target, np.inf).min()) if low.any() else 0.0
    return 0.5 * (hi + lo)


def decision_values(model: SvmModel, X) -> np.ndarray:
    """phi at a batch of points, shape (N,) for input (N, dim)."""
    pts = np.atleast_2d(np.asarray(X, dtype=float))
    if pts.shape[1] != model.dim and model.n_support:
        raise InvalidArgumentError(
            f"query dimension {pts.shape[1]} does not match model dimension {model.dim}"
        )
    if model.n_support == 0:
        return np.full(pts.shape[0], model.bias)
    K = kernel_matrix(model.kernel, pts, model.support_points)
    return K @ (model.alphas * model.labels) + model.bias


def decision_value(model: SvmModel, x) -> float:
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1:
        raise InvalidArgumentError("decision_value expects a single point")
    return float(decision_values(model, xv[None, :])[0])


def predict(model: SvmModel, x) -> int:
    """Sign of the decision function; an exact zero counts as +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def predict_batch(model: SvmModel, X) -> np.ndarray:
    return np.where(decision_values(model, X) >= 0.0, 1, -1)


def training_accuracy(model: SvmModel, data) -> float:
    if len(data) == 0:
        raise InvalidArgumentError("accuracy of an empty data set is undefined")
    X, y = _split_arrays(data)
    return float((predict_batch(model, X) == y).mean())


def dual_objective(model: SvmModel) -> float:
    """Value of the minimized dual objective at the trained alphas."""
    if model.n_support == 0:
        return 0.0
    coef = model.alphas * model.labels
    K = kernel_matrix(model.kernel, model.support_points, model.support_points)
    return float(0.5 * coef @ K @ coef - model.alphas.sum())
