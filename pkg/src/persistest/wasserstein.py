"""Wasserstein and bottleneck distances between persistence diagrams.

Ground cost is the l-infinity distance between diagram points.  Each diagram
is augmented with the diagonal projections of the other's points, so a point
(b, d) may be sent to ((b+d)/2, (b+d)/2) at cost (d-b)/2.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from .cech import PersistenceDiagram, PointCloud
from .errors import DomainError

__all__ = [
    "Matching",
    "wasserstein_distance",
    "bottleneck_distance",
    "hausdorff_distance",
    "distance_matrix",
    "cross_distances",
]


@dataclass
class Matching:
    """Optimal bijection between two diagonal-augmented diagrams.

    ``pairs`` holds ``(i, j, cost)`` triples: ``i`` indexes U, ``j`` indexes V
    and ``None`` stands for the diagonal projection of the partner.  Pairs of
    two diagonal points are omitted since they cost nothing.
    """

    pairs: list[tuple[int | None, int | None, float]] = field(default_factory=list)
    r: float = 2.0
    total_cost: float = 0.0

    @property
    def per_pair_cost(self) -> list[float]:
        return [c for _, _, c in self.pairs]

    def partner_of_source(self) -> dict[int, int | None]:
        return {i: j for i, j, _ in self.pairs if i is not None}

    def partner_of_target(self) -> dict[int, int | None]:
        return {j: i for i, j, _ in self.pairs if j is not None}


def _as_pairs(D) -> np.ndarray:
    if isinstance(D, PersistenceDiagram):
        return D.pairs
    arr = np.asarray(D, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise DomainError("diagram coordinates must be finite")
    return arr


def _costs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Point-point l-inf costs and the point-diagonal costs of each side."""
    if U.shape[0] and V.shape[0]:
        C = cdist(U, V, metric="chebyshev")
    else:
        C = np.zeros((U.shape[0], V.shape[0]))
    return C, (U[:, 1] - U[:, 0]) / 2.0, (V[:, 1] - V[:, 0]) / 2.0


def _aggregate(costs: list[float], r: float) -> float:
    if not costs:
        return 0.0
    return math.fsum(c**r for c in costs) ** (1.0 / r)


def wasserstein_distance(U, V, r: float = 2.0) -> tuple[float, Matching]:
    """W_r between two diagrams via an assignment problem on the augmented sets."""
    r = float(r)
    if not r >= 1:
        raise DomainError(f"Wasserstein order must satisfy r >= 1, got {r}")
    if math.isinf(r):
        return bottleneck_distance(U, V)
    A, B = _as_pairs(U), _as_pairs(V)
    n, m = A.shape[0], B.shape[0]
    if n + m == 0:
        return 0.0, Matching([], r, 0.0)
    C, du, dv = _costs(A, B)
    M = np.zeros((n + m, m + n))
    M[:n, :m] = C**r
    M[:n, m:] = np.inf
    M[n:, :m] = np.inf
    M[np.arange(n), m + np.arange(n)] = du**r
    M[n + np.arange(m), np.arange(m)] = dv**r
    rows, cols = linear_sum_assignment(M)
    cols = _exact_swaps(M, cols)
    pairs = []
    for i, j in zip(rows.tolist(), cols.tolist()):
        if i < n and j < m:
            pairs.append((i, j, float(C[i, j])))
        elif i < n:
            pairs.append((i, None, float(du[i])))
        elif j < m:
            pairs.append((None, j, float(dv[j])))
    total = _aggregate([c for _, _, c in pairs], r)
    return total, Matching(pairs, r, total)


def _exact_swaps(M: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Settle near-ties left by float accumulation in the solver.

    Two rows exchange partners whenever that lowers the exactly rounded sum of
    their entries; only swaps that look like ties in float arithmetic are
    checked exactly.
    """
    cols = cols.copy()
    n = cols.size
    for _ in range(n):
        cur = M[np.arange(n), cols]
        alt = M[:, cols]  # alt[i, k] = M[i, cols[k]]
        with np.errstate(invalid="ignore"):
            gain = (cur[:, None] + cur[None, :]) - (alt + alt.T)
        scale = np.abs(cur[:, None]) + np.abs(cur[None, :]) + 1e-300
        cand = np.argwhere(np.triu(np.isfinite(gain) & (gain > -1e-12 * scale), 1))
        swapped = False
        for i, k in cand.tolist():
            a, b = M[i, cols[i]], M[k, cols[k]]
            c, d = M[i, cols[k]], M[k, cols[i]]
            if math.fsum([a, b, -c, -d]) > 0:
                cols[i], cols[k] = cols[k], cols[i]
                swapped = True
                break
        if not swapped:
            break
    return cols


def _perfect_matching(C, du, dv, eps) -> np.ndarray | None:
    n, m = C.shape
    allowed = np.zeros((n + m, m + n), dtype=bool)
    allowed[:n, :m] = C <= eps
    allowed[np.arange(n), m + np.arange(n)] = du <= eps
    allowed[n + np.arange(m), np.arange(m)] = dv <= eps
    allowed[n:, m:] = True
    match = maximum_bipartite_matching(csr_matrix(allowed), perm_type="column")
    if np.any(match < 0):
        return None
    return match


def bottleneck_distance(U, V) -> tuple[float, Matching]:
    """W_inf by binary search over the finite set of attainable l-inf costs."""
    A, B = _as_pairs(U), _as_pairs(V)
    n, m = A.shape[0], B.shape[0]
    if n + m == 0:
        return 0.0, Matching([], math.inf, 0.0)
    C, du, dv = _costs(A, B)
    candidates = np.unique(np.concatenate([[0.0], C.ravel(), du, dv]))
    lo, hi = 0, candidates.size - 1
    best = _perfect_matching(C, du, dv, candidates[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        found = _perfect_matching(C, du, dv, candidates[mid])
        if found is None:
            lo = mid + 1
        else:
            hi, best = mid, found
    value = float(candidates[lo])
    pairs = []
    for i, j in enumerate(best.tolist()):
        if i < n and j < m:
            pairs.append((i, j, float(C[i, j])))
        elif i < n:
            pairs.append((i, None, float(du[i])))
        elif j < m:
            pairs.append((None, j, float(dv[j])))
    return value, Matching(pairs, math.inf, value)


def _distance_value(U, V, r: float) -> float:
    if math.isinf(r):
        return bottleneck_distance(U, V)[0]
    return wasserstein_distance(U, V, r)[0]


def distance_matrix(diagrams, r: float = 2.0, threads: int | None = 1) -> np.ndarray:
    """Symmetric matrix of pairwise W_r distances (zero diagonal)."""
    n = len(diagrams)
    D = np.zeros((n, n))
    idx = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if threads is not None and threads > 1 and len(idx) > 64:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda ij: _distance_value(diagrams[ij[0]], diagrams[ij[1]], r), idx))
    else:
        vals = [_distance_value(diagrams[i], diagrams[j], r) for i, j in idx]
    for (i, j), v in zip(idx, vals):
        D[i, j] = D[j, i] = v
    return D


def cross_distances(diagrams, target, r: float = 2.0) -> np.ndarray:
    """W_r from every diagram in ``diagrams`` to a fixed ``target``."""
    return np.array([_distance_value(D, target, r) for D in diagrams])


def _as_points(Z) -> np.ndarray:
    arr = np.asarray(Z, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim <= 1 else arr


def hausdorff_distance(X, Y) -> float:
    """Hausdorff distance between two non-empty finite point sets (Euclidean)."""
    P, Q = (Z.points if isinstance(Z, PointCloud) else _as_points(Z) for Z in (X, Y))
    if P.size == 0 or Q.size == 0:
        raise DomainError("Hausdorff distance needs non-empty point sets")
    if P.shape[1] != Q.shape[1]:
        raise DomainError("point sets live in different dimensions")
    D = cdist(P, Q)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
