"""Empirical Fréchet functions, means and variances of persistence diagrams."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .cech import PersistenceDiagram
from .errors import DomainError
from .wasserstein import cross_distances, wasserstein_distance

__all__ = [
    "FrechetEstimate",
    "PartialSumPath",
    "frechet_function",
    "estimate_frechet_mean",
    "variance_partial_sum",
    "prefix_discrepancy",
]


def _diagram(D) -> PersistenceDiagram:
    return D if isinstance(D, PersistenceDiagram) else PersistenceDiagram(D)


def frechet_function(candidate, sample, r: float = 2.0) -> float:
    """Mean squared W_r distance from ``candidate`` to the sample diagrams."""
    if len(sample) == 0:
        raise DomainError("Fréchet function of an empty sample is undefined")
    d = cross_distances(sample, candidate, r)
    return float(np.mean(d**2))


@dataclass
class FrechetEstimate:
    mean: PersistenceDiagram
    variance: float
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False
    heuristic: bool = False
    n_iter: int = 0


def _inner_min(a: np.ndarray, d: np.ndarray, n_diag: int, u: float, target: float) -> tuple[float, float]:
    """min over v of sum_i max(a_i, |v - d_i|)^2 + n_diag * ((v - u) / 2)^2, exactly.

    The function is a convex piecewise quadratic with breakpoints d_i +- a_i.
    Term i is quadratic in v outside [d_i - a_i, d_i + a_i] and constant
    inside, so the coefficients of every piece follow from prefix sums over
    the sorted breakpoints.  On a flat stretch the point nearest ``target``
    is taken.
    """
    # shift so that target sits at 0; keeps the quadratic coefficients small
    d = d - target
    u = u - target
    L, R = d - a, d + a
    oL, oR = np.argsort(L, kind="stable"), np.argsort(R, kind="stable")
    z = np.sort(np.concatenate([L, R]))
    edges = np.concatenate([[min(z[0], 0.0) - 1.0], z, [max(z[-1], 0.0) + 1.0]])
    mids = 0.5 * (edges[:-1] + edges[1:])

    def cums(x, order):
        return np.concatenate([[0.0], np.cumsum(x[order])])

    P = d.size
    kL = np.searchsorted(L[oL], mids, side="right")  # terms with L_i > v are those from kL on
    kR = np.searchsorted(R[oR], mids, side="left")  # terms with R_i < v are the first kR
    parts = []
    for x in (np.ones(P), d, d * d, a * a):
        cl, cr = cums(x, oL), cums(x, oR)
        parts.append(cl[-1] - cl[kL] + cr[kR])
    cnt, s1, s2, sa = parts
    A = cnt + n_diag / 4.0
    B = -2.0 * s1 - n_diag * u / 2.0
    C = s2 + (float(np.dot(a, a)) - sa) + n_diag * u * u / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(A > 0, -B / (2 * A), 0.0)
    v = np.clip(v, edges[:-1], edges[1:])
    h = (A * v + B) * v + C
    hmin = float(h.min())
    ties = np.flatnonzero(h <= hmin + 1e-13 * max(abs(hmin), 1e-300))
    k = ties[np.argmin(np.abs(v[ties]))]
    return max(hmin, 0.0), float(v[k] + target)


def _linf_point_mean(P: np.ndarray, n_diag: int) -> tuple[float, float]:
    """argmin over c = (u, v) of sum_i ||c - P_i||_inf^2 + n_diag * ((v - u) / 2)^2.

    Exact in v for fixed u; the convex profile in u is minimised by a bounded
    scalar search.  The minimiser is often not unique under the l-inf norm;
    ties go to the point nearest the coordinate-wise mean of ``P``.
    """
    b, d = P[:, 0], P[:, 1]
    ub, vb = float(b.mean()), float(d.mean())
    g = lambda u: _inner_min(np.abs(u - b), d, n_diag, u, vb)[0]
    # the diagonal term pulls u up towards v, so search up to the largest coordinate
    lo, hi = float(b.min()), float(max(b.max(), d.max()))
    scale = max(1.0, abs(hi), abs(lo))
    u = minimize_scalar(g, bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-14 * scale, "maxiter": 500}).x
    gmin = g(u)
    level = gmin + 1e-12 * gmin

    def edge(inside, outside):
        # bisect for the end of the (convex) level set {g <= level}
        if g(outside) <= level:
            return outside
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if g(mid) <= level:
                inside = mid
            else:
                outside = mid
        return inside

    if g(min(max(ub, lo), hi)) > level:
        u = min(max(ub, edge(u, lo)), edge(u, hi))
    else:
        u = min(max(ub, lo), hi)
    return float(u), _inner_min(np.abs(u - b), d, n_diag, u, vb)[1]


def _update(candidate: np.ndarray, sample, r: float) -> np.ndarray:
    """One block step: rematch every sample diagram, then move each candidate
    point to the minimiser of its summed squared l-inf costs to its partners.

    A diagonal partner costs the point's own distance to the diagonal.  Points
    that end up on or below the diagonal are dropped.
    """
    K = candidate.shape[0]
    partners: list[list[np.ndarray]] = [[] for _ in range(K)]
    n_diag = np.zeros(K, dtype=int)
    for D in sample:
        _, match = wasserstein_distance(D, candidate, r)
        partner = {j: i for i, j, _ in match.pairs if j is not None}
        for k in range(K):
            i = partner.get(k)
            if i is None:
                n_diag[k] += 1
            else:
                partners[k].append(D.pairs[i])
    new = []
    for k in range(K):
        if not partners[k]:
            continue
        new.append(_linf_point_mean(np.array(partners[k]), int(n_diag[k])))
    new = np.array(new, dtype=float).reshape(-1, 2)
    return new[new[:, 1] > new[:, 0]]


def _pooled_start(base: np.ndarray, group, n_outside: int) -> np.ndarray:
    """Candidate built by forcing point-to-point matches between ``base`` and
    every diagram in ``group``; diagrams outside the group count as diagonal
    partners.  Used only to seed a descent away from the local optima that
    diagonal matches create."""
    K = base.shape[0]
    partners: list[list[np.ndarray]] = [[p] for p in base]
    n_diag = np.full(K, n_outside, dtype=int)
    for D in group:
        P = D.pairs
        hit = np.zeros(K, dtype=bool)
        if len(P):
            cost = np.max(np.abs(base[:, None, :] - P[None, :, :]), axis=2) ** 2
            rows, cols = linear_sum_assignment(cost)
            for k, i in zip(rows, cols):
                partners[k].append(P[i])
                hit[k] = True
        n_diag[~hit] += 1
    new = np.array([_linf_point_mean(np.array(p), int(n)) for p, n in zip(partners, n_diag)],
                   dtype=float).reshape(-1, 2)
    return new[new[:, 1] > new[:, 0]]


def _descend(current: np.ndarray, sample, r: float, tol: float, max_iter: int):
    value = frechet_function(current, sample, r)
    trace = [value]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        if current.shape[0] == 0:
            converged = True
            break
        proposal = _update(current, sample, r)
        new_value = frechet_function(proposal, sample, r)
        if not new_value < value:
            converged = True
            break
        improvement = value - new_value
        current, value = proposal, new_value
        trace.append(value)
        if improvement < tol:
            converged = True
            break
    return current, value, trace, converged, it


def estimate_frechet_mean(
    sample,
    r: float = 2.0,
    init_strategy: str = "medoid",
    tol: float = 1e-8,
    max_iter: int = 100,
    distance_matrix: np.ndarray | None = None,
    n_starts: int = 3,
) -> FrechetEstimate:
    """Local minimiser of the empirical Fréchet function by alternating matching and point updates.

    ``init_strategy``:

    * ``"medoid"``: descend from each of the ``n_starts`` distinct non-empty
      sample diagrams with the smallest Fréchet objective (the medoid first),
      from one pooled candidate per subset of those diagrams, and from the
      empty diagram; keep the best result (earlier seeds win ties);
    * ``"first"``: a single descent from the first diagram.

    Each step re-matches every sample diagram to the current candidate and
    moves every candidate point to the l-inf minimiser for its partners; a
    step that does not lower the objective is rejected, so the trace never
    increases.  For r != 2 the point update ignores the outer exponent and the
    estimate is flagged as heuristic.
    """
    sample = [_diagram(D) for D in sample]
    m = len(sample)
    if m == 0:
        raise DomainError("cannot estimate a Fréchet mean from an empty sample")
    if not r >= 2:
        raise DomainError("Fréchet mean estimation requires r >= 2")
    if n_starts < 1:
        raise DomainError("n_starts must be positive")
    feature_dim = sample[0].feature_dim
    heuristic = r != 2

    if all(len(D) == 0 for D in sample):
        empty = PersistenceDiagram((), feature_dim)
        return FrechetEstimate(empty, 0.0, [0.0], True, heuristic, 0)

    if init_strategy == "medoid":
        if distance_matrix is None:
            objectives = np.array([frechet_function(D, sample, r) for D in sample])
        else:
            objectives = np.mean(np.asarray(distance_matrix) ** 2, axis=1)
        order = [i for i in np.argsort(objectives, kind="stable").tolist() if len(sample[i])]
        starts, seen = [], []
        for i in order:
            if any(sample[i] == sample[j] for j in seen):
                continue
            seen.append(i)
            starts.append(i)
            if len(starts) == n_starts:
                break
    elif init_strategy == "first":
        starts = [0]
    else:
        raise DomainError(f"unknown init_strategy {init_strategy!r}")

    seeds = [sample[i].pairs.copy() for i in starts]
    if init_strategy == "medoid":
        for size in range(2, len(starts) + 1):
            for T in itertools.combinations(starts, size):
                group = [D for D in sample if any(D == sample[i] for i in T)]
                base = sample[T[0]]
                rest = [D for D in group if D is not base]
                seeds.append(_pooled_start(base.pairs, rest, m - len(group)))
        seeds.append(np.empty((0, 2)))

    best = None
    for seed in seeds:
        run = _descend(seed, sample, r, tol, max_iter)
        if best is None or run[1] < best[1]:
            best = run
    current, value, trace, converged, it = best
    mean = PersistenceDiagram(current, feature_dim)
    return FrechetEstimate(mean, value, trace, converged, heuristic, it)


@dataclass
class PartialSumPath:
    """Prefix averages of squared distances to a fixed mean.

    ``values[k-1]`` is the average over the first k diagrams, i.e. the process
    at s = k/m; for s < 1/m the process is 0 by convention.
    """

    sq_distances: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / self.m

    @classmethod
    def from_sq_distances(cls, sq) -> "PartialSumPath":
        sq = np.asarray(sq, dtype=float)
        if sq.ndim != 1 or sq.size == 0:
            raise DomainError("need a non-empty 1-D array of squared distances")
        k = np.arange(1, sq.size + 1)
        return cls(sq, np.cumsum(sq) / k)

    def at_counts(self, counts) -> np.ndarray:
        """Process value at prefix lengths ``counts`` (0 maps to 0)."""
        counts = np.asarray(counts, dtype=np.intp)
        out = np.zeros(counts.shape)
        pos = counts > 0
        out[pos] = self.values[counts[pos] - 1]
        return out

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        counts = np.floor(np.round(self.m * s, 9)).astype(np.intp)
        return self.at_counts(counts)


def variance_partial_sum(sample, mean, r: float = 2.0) -> PartialSumPath:
    """The variance estimate as a function of the prefix fraction s, with the full-sample mean plugged in."""
    sample = [_diagram(D) for D in sample]
    d = cross_distances(sample, _diagram(mean), r)
    return PartialSumPath.from_sq_distances(d**2)


def prefix_discrepancy(sample, mean_a, mean_b, r: float = 2.0) -> float:
    """max over sqrt(m) <= k <= m of |sum_{i<=k} (W^2(D_i, a) - W^2(D_i, b))| / sqrt(k).

    Diagnostic for how much swapping one mean estimate for another moves the
    partial sums; no threshold is attached to it.
    """
    sample = [_diagram(D) for D in sample]
    m = len(sample)
    da = cross_distances(sample, _diagram(mean_a), r) ** 2
    db = cross_distances(sample, _diagram(mean_b), r) ** 2
    partial = np.cumsum(da - db)
    k = np.arange(1, m + 1)
    keep = k >= math.sqrt(m)
    return float(np.max(np.abs(partial[keep]) / np.sqrt(k[keep])))
