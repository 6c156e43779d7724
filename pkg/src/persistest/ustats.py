"""Order-two U-statistics, their two-parameter partial-sum processes and Hoeffding decompositions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DomainError
from .wasserstein import distance_matrix

__all__ = [
    "Kernel",
    "TwoParamPath",
    "HoeffdingEstimate",
    "product_kernel",
    "half_squared_difference_kernel",
    "inco_kernel",
    "kernel_matrix",
    "u_statistic",
    "u_partial_sum",
    "coefficient_a_n",
    "coefficient_b_ni",
    "hoeffding_decompose",
    "degeneracy_check",
    "inco_variance",
    "inco_partial_sums",
    "inco_kernel_bound",
    "holder_constant",
]


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel h(x, y).

    ``pairwise`` optionally maps (xs, ys) to the full matrix [h(x_i, y_j)]; it is
    used for speed whenever available.
    """

    func: Callable[[Any, Any], float]
    name: str = "kernel"
    pairwise: Callable[[Sequence, Sequence], np.ndarray] | None = None
    bound: float | None = None

    def __call__(self, x, y) -> float:
        return float(self.func(x, y))

    def cross(self, xs, ys) -> np.ndarray:
        if self.pairwise is not None:
            return np.asarray(self.pairwise(xs, ys), dtype=float)
        return np.array([[self.func(x, y) for y in ys] for x in xs], dtype=float)


def _outer(op):
    def pairwise(xs, ys):
        return op(np.asarray(xs, dtype=float)[:, None], np.asarray(ys, dtype=float)[None, :])

    return pairwise


def product_kernel() -> Kernel:
    return Kernel(lambda x, y: x * y, "product", _outer(np.multiply))


def half_squared_difference_kernel() -> Kernel:
    """h(x, y) = (x - y)^2 / 2, whose U-statistic is the sample variance."""
    f = lambda x, y: 0.5 * (x - y) ** 2
    return Kernel(f, "half_squared_difference", _outer(f))


def inco_kernel(r: float = 2.0, threads: int | None = 1) -> Kernel:
    """h(U, V) = W_r(U, V)^2 / 2 on persistence diagrams."""
    from .wasserstein import _distance_value

    def pairwise(xs, ys):
        if xs is ys:
            return 0.5 * distance_matrix(xs, r, threads) ** 2
        return np.array([[0.5 * _distance_value(x, y, r) ** 2 for y in ys] for x in xs])

    return Kernel(lambda x, y: 0.5 * _distance_value(x, y, r) ** 2, f"inco_W{r}", pairwise)


def kernel_matrix(sample, kernel: Kernel) -> np.ndarray:
    """Symmetric matrix [h(X_i, X_j)] with the (unused) diagonal set to 0."""
    n = len(sample)
    if kernel.pairwise is not None:
        H = np.array(kernel.pairwise(sample, sample), dtype=float)
    else:
        H = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                H[i, j] = H[j, i] = kernel(sample[i], sample[j])
    np.fill_diagonal(H, 0.0)
    return H


def _floor(n: int, s: float) -> int:
    return int(math.floor(round(n * float(s), 9)))


def coefficient_a_n(n: int, s: float, t: float) -> float:
    """Fraction of ordered off-diagonal pairs (i, j) with i <= floor(ns), j <= floor(nt)."""
    if n < 2:
        raise DomainError("a_n needs n >= 2")
    ns, nt = _floor(n, s), _floor(n, t)
    return max((nt - 1) * ns, (ns - 1) * nt, 0) / (n * (n - 1))


def coefficient_b_ni(n: int, i: int, t: float) -> float:
    if n < 2 or not 1 <= i <= n:
        raise DomainError("b_{n,i} needs n >= 2 and 1 <= i <= n")
    nt = _floor(n, t)
    count = nt - 1 if i <= nt else nt
    return max(count, 0) / (n - 1)


@dataclass
class TwoParamPath:
    """U_n(h)(s, t) on the lattice {0, 1/n, ..., 1}^2.

    ``values[a, b]`` holds the process at (s, t) = (a/n, b/n).
    """

    n: int
    values: np.ndarray

    @classmethod
    def from_matrix(cls, H: np.ndarray) -> "TwoParamPath":
        H = np.array(H, dtype=float)
        n = H.shape[0]
        if n < 2:
            raise DomainError("U-statistics need at least two observations")
        np.fill_diagonal(H, 0.0)
        V = np.zeros((n + 1, n + 1))
        V[1:, 1:] = H.cumsum(axis=0).cumsum(axis=1)
        return cls(n, V / (n * (n - 1)))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def total(self) -> float:
        return float(self.values[self.n, self.n])

    def at_counts(self, a, b) -> np.ndarray:
        return self.values[np.ix_(np.asarray(a, dtype=np.intp), np.asarray(b, dtype=np.intp))]

    def __call__(self, s: float, t: float) -> float:
        return float(self.values[_floor(self.n, s), _floor(self.n, t)])


def u_statistic(sample, kernel: Kernel) -> float:
    n = len(sample)
    if n < 2:
        raise DomainError("U-statistics need at least two observations")
    H = kernel_matrix(sample, kernel)
    return float(H[np.triu_indices(n, 1)].sum() * 2.0 / (n * (n - 1)))


def u_partial_sum(sample, kernel: Kernel) -> TwoParamPath:
    if len(sample) < 2:
        raise DomainError("U-statistics need at least two observations")
    return TwoParamPath.from_matrix(kernel_matrix(sample, kernel))


@dataclass
class HoeffdingEstimate:
    """Plug-in Hoeffding components, estimated against an independent reference sample.

    theta_hat averages h over sample x reference; h1_values[i] averages
    h(X_i, .) over the reference minus theta_hat; h2_values follows from
    h = theta + h1(x) + h1(y) + h2(x, y).
    """

    theta_hat: float
    h1_values: np.ndarray
    h2_values: np.ndarray
    reference_size: int
    kernel: Kernel | None = None
    reference: Sequence | None = None
    sample: Sequence | None = None

    def h1(self, xs) -> np.ndarray:
        return self.kernel.cross(xs, self.reference).mean(axis=1) - self.theta_hat

    def h2(self, xs, ys) -> np.ndarray:
        H = self.kernel.cross(xs, ys)
        return H - self.theta_hat - self.h1(xs)[:, None] - self.h1(ys)[None, :]


def hoeffding_decompose(sample, kernel: Kernel, reference) -> HoeffdingEstimate:
    if len(reference) == 0:
        raise DomainError("Hoeffding decomposition needs a non-empty reference sample")
    if len(sample) == 0:
        raise DomainError("Hoeffding decomposition needs a non-empty sample")
    cross = kernel.cross(sample, reference)
    theta = float(cross.mean())
    h1 = cross.mean(axis=1) - theta
    H = kernel.cross(sample, sample)
    h2 = H - theta - h1[:, None] - h1[None, :]
    return HoeffdingEstimate(theta, h1, h2, len(reference), kernel, reference, sample)


def degeneracy_check(estimate: HoeffdingEstimate, probes) -> tuple[np.ndarray, np.ndarray]:
    """Means over the decomposed sample of h2_hat(x, X_j) for each probe x, with standard errors.

    Because theta_hat averages over the same sample, the mean equals the
    difference of two independent averages, mean_j h(x, X_j) - mean_k h(x, R_k);
    the standard error combines both.
    """
    sample, ref = estimate.sample, estimate.reference
    hs = estimate.kernel.cross(probes, sample)
    hr = estimate.kernel.cross(probes, ref)
    h1s = estimate.h1_values
    vals = hs - estimate.theta_hat - estimate.h1(probes)[:, None] - h1s[None, :]
    means = vals.mean(axis=1)
    se = np.sqrt(hs.var(axis=1, ddof=1) / hs.shape[1] + hr.var(axis=1, ddof=1) / hr.shape[1])
    return means, se


def inco_variance(diagrams, r: float = 2.0, threads: int | None = 1, distances: np.ndarray | None = None) -> float:
    """U-statistic estimate of half the expected squared W_r between independent copies."""
    return inco_partial_sums(diagrams, r, threads, distances).total


def inco_partial_sums(diagrams, r: float = 2.0, threads: int | None = 1, distances: np.ndarray | None = None) -> TwoParamPath:
    if len(diagrams) < 2:
        raise DomainError("inco-variance needs at least two diagrams")
    if distances is None:
        distances = distance_matrix(diagrams, r, threads)
    return TwoParamPath.from_matrix(0.5 * np.asarray(distances) ** 2)


def inco_kernel_bound(T: int, feature_dim: int, r: float, diameter: float) -> float:
    """Uniform bound ((T^(k+1) + T^(k+2)) diam^r)^(1/r) for clouds of at most T points."""
    k = feature_dim
    return float(((T ** (k + 1) + T ** (k + 2)) * diameter**r) ** (1.0 / r))


def holder_constant(h_values, h_values_prime, hausdorff_sums, rho: float) -> float:
    """Smallest L with |h - h'| <= L * (d_H(X,X') + d_H(Y,Y'))^rho over the given pairs.

    Pairs with zero distance must have equal kernel values; otherwise the
    constant is infinite.
    """
    if not 0 < rho <= 1:
        raise DomainError("rho must lie in (0, 1]")
    dh = np.abs(np.asarray(h_values, float) - np.asarray(h_values_prime, float))
    d = np.asarray(hausdorff_sums, float)
    if np.any(d < 0):
        raise DomainError("distances are non-negative")
    zero = d == 0
    if np.any(dh[zero] > 0):
        return math.inf
    if not np.any(~zero):
        return 0.0
    return float(np.max(dh[~zero] / d[~zero] ** rho))
