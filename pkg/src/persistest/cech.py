"""Čech filtrations of finite point clouds and their persistence diagrams.

A simplex enters the Čech filtration at the radius of the smallest closed
Euclidean ball enclosing its vertices.  Persistence is computed by the
standard column reduction over GF(2).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "PointCloud",
    "FilteredSimplex",
    "Filtration",
    "PersistenceDiagram",
    "min_enclosing_ball_radius",
    "build_cech_filtration",
    "compute_persistence",
    "diagram_of",
]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A finite set of points in R^d, optionally constrained to the box [lo, hi]^d."""

    points: np.ndarray
    domain: tuple[float, float] | None = None

    def __init__(self, points, dim: int | None = None, domain: tuple[float, float] | None = None):
        arr = np.asarray(points, dtype=float)
        if arr.size == 0:
            arr = np.empty((0, dim if dim is not None else (arr.shape[-1] if arr.ndim == 2 else 1)))
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise DomainError(f"points must be an (n, d) array with d >= 1, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise DomainError(f"expected dimension {dim}, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("point coordinates must be finite")
        if domain is not None:
            lo, hi = float(domain[0]), float(domain[1])
            if arr.size and (arr.min() < lo or arr.max() > hi):
                raise DomainError(f"points fall outside the domain [{lo}, {hi}]^{arr.shape[1]}")
            domain = (lo, hi)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "domain", domain)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))

    def domain_diameter(self) -> float | None:
        if self.domain is None:
            return None
        lo, hi = self.domain
        return float((hi - lo) * np.sqrt(self.dim))


@dataclass(frozen=True)
class FilteredSimplex:
    vertices: tuple[int, ...]
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass
class Filtration:
    """Simplices sorted by (value, dimension, vertices); face-monotone."""

    simplices: list[FilteredSimplex]
    max_radius: float
    max_dim: int
    n_points: int = 0
    n_duplicates: int = 0

    @property
    def duplicates_collapsed(self) -> bool:
        return self.n_duplicates > 0

    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self) -> Iterator[FilteredSimplex]:
        return iter(self.simplices)

    def __getitem__(self, i):
        return self.simplices[i]


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Finite multiset of (birth, death) pairs for one homology dimension.

    ``n_essential`` counts classes discarded because they never die inside the
    filtration range; ``n_zero_persistence`` counts removed birth == death pairs.
    """

    pairs: np.ndarray
    feature_dim: int = 0
    n_essential: int = 0
    n_zero_persistence: int = 0

    def __init__(self, pairs=(), feature_dim: int = 0, n_essential: int = 0, n_zero_persistence: int = 0):
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(arr)):
            raise DomainError("diagram coordinates must be finite")
        if arr.size and np.any(arr[:, 1] <= arr[:, 0]):
            raise DomainError("every diagram point needs death > birth")
        if arr.shape[0] > 1:
            arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pairs", arr)
        object.__setattr__(self, "feature_dim", int(feature_dim))
        object.__setattr__(self, "n_essential", int(n_essential))
        object.__setattr__(self, "n_zero_persistence", int(n_zero_persistence))

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (
            self.feature_dim == other.feature_dim
            and self.pairs.shape == other.pairs.shape
            and bool(np.array_equal(self.pairs, other.pairs))
        )

    def __repr__(self) -> str:
        pts = ", ".join(f"({b:.6g}, {d:.6g})" for b, d in self.pairs[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"PersistenceDiagram(k={self.feature_dim}, [{pts}{more}])"

    @property
    def births(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.pairs[:, 1]

    def persistence(self) -> np.ndarray:
        return self.pairs[:, 1] - self.pairs[:, 0]

    def total_persistence(self, p: float = 1.0) -> float:
        return float(np.sum(self.persistence() ** p))


# ---------------------------------------------------------------------------
# minimal enclosing balls


def _subsets(k: int) -> list[tuple[int, ...]]:
    return [s for size in range(1, k + 1) for s in combinations(range(k), size)]


def _batched_meb_radius(P: np.ndarray) -> np.ndarray:
    """Minimal enclosing ball radii for a batch ``P`` of shape (B, k, d).

    The smallest enclosing ball is the circumball of some affinely independent
    support subset; we enumerate all subsets, keep the circumballs that contain
    every point and take the smallest.
    """
    B, k, _ = P.shape
    best = np.full(B, np.inf)
    if k == 1:
        return np.zeros(B)
    # canonical vertex order, so the rounding does not depend on labels
    order = np.lexsort(tuple(P[:, :, j] for j in reversed(range(P.shape[2]))), axis=-1)
    P = np.take_along_axis(P, order[:, :, None], axis=1)
    for sub in _subsets(k):
        S = P[:, list(sub)]
        s0 = S[:, 0]
        if len(sub) == 1:
            center = s0
            r2 = np.zeros(B)
        else:
            A = S[:, 1:] - s0[:, None, :]
            G = A @ np.swapaxes(A, 1, 2)
            diag = np.einsum("bii->bi", G)
            det = np.linalg.det(G)
            ok = det > 1e-10 * np.prod(diag, axis=1)
            G = np.where(ok[:, None, None], G, np.eye(len(sub) - 1))
            lam = np.linalg.solve(G, 0.5 * diag[..., None])[..., 0]
            offset = np.einsum("bi,bid->bd", lam, A)
            center = s0 + offset
            r2 = np.einsum("bd,bd->b", offset, offset)
            r2 = np.where(ok, r2, np.inf)
        d2 = np.sum((P - center[:, None, :]) ** 2, axis=2)
        inside = np.all(d2 <= r2[:, None] * (1.0 + 1e-10) + 1e-300, axis=1)
        best = np.where(inside & (r2 < best), r2, best)
    return np.sqrt(best)


def min_enclosing_ball_radius(points) -> float:
    """Radius of the smallest closed Euclidean ball containing ``points``."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None] if P.size else P.reshape(0, 1)
    if P.shape[0] == 0:
        raise DomainError("minimal enclosing ball of an empty point set is undefined")
    if not np.all(np.isfinite(P)):
        raise DomainError("point coordinates must be finite")
    P = np.unique(P, axis=0)
    return float(_batched_meb_radius(P[None])[0])


# ---------------------------------------------------------------------------
# filtration


def _collapse_duplicates(points: np.ndarray) -> tuple[np.ndarray, int]:
    if points.shape[0] == 0:
        return points, 0
    _, first = np.unique(points, axis=0, return_index=True)
    keep = np.sort(first)
    return points[keep], points.shape[0] - keep.size


def build_cech_filtration(cloud: PointCloud, max_dim: int, max_radius: float | None = None) -> Filtration:
    """All simplices of dimension <= ``max_dim`` with Čech value <= ``max_radius``.

    ``max_radius`` defaults to the domain diameter, or to the cloud diameter
    when no domain is declared; either way every finite class dies in range.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if max_dim < 0:
        raise DomainError("max_dim must be non-negative")
    pts, n_dup = _collapse_duplicates(np.asarray(cloud.points))
    if n_dup:
        warnings.warn(f"collapsed {n_dup} duplicate point(s)", RuntimeWarning, stacklevel=2)
    n = pts.shape[0]
    if max_radius is None:
        max_radius = cloud.domain_diameter()
        if max_radius is None:
            max_radius = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=2))) if n > 1 else 1.0
    if not max_radius > 0:
        raise DomainError("max_radius must be positive")

    simplices = [FilteredSimplex((i,), 0.0) for i in range(n)]
    prev: dict[tuple[int, ...], float] = {(i,): 0.0 for i in range(n)}
    for p in range(1, max_dim + 1):
        if n < p + 1 or not prev:
            break
        combos = np.array(list(combinations(range(n), p + 1)), dtype=np.intp)
        radii = _batched_meb_radius(pts[combos])
        current: dict[tuple[int, ...], float] = {}
        for verts, rad in zip(map(tuple, combos.tolist()), radii.tolist()):
            # facets absent from ``prev`` exceed max_radius, hence so does this simplex
            facet_vals = [prev.get(verts[:j] + verts[j + 1:]) for j in range(p + 1)]
            if any(v is None for v in facet_vals):
                continue
            rad = max(rad, max(facet_vals))
            if rad <= max_radius:
                current[verts] = rad
        simplices.extend(FilteredSimplex(v, r) for v, r in current.items())
        prev = current
    simplices.sort(key=lambda s: (s.value, len(s.vertices), s.vertices))
    return Filtration(simplices, float(max_radius), max_dim, n_points=n, n_duplicates=n_dup)


# ---------------------------------------------------------------------------
# persistence


def _check_filtration(simplices: Sequence[FilteredSimplex]) -> None:
    seen: dict[tuple[int, ...], float] = {}
    last = None
    for s in simplices:
        key = (s.value, len(s.vertices), s.vertices)
        if last is not None and key < last:
            raise ContractError(f"filtration is not sorted at simplex {s.vertices}")
        last = key
        if len(s.vertices) > 1:
            for j in range(len(s.vertices)):
                face = s.vertices[:j] + s.vertices[j + 1:]
                fv = seen.get(face)
                if fv is None:
                    raise ContractError(f"face {face} of {s.vertices} is missing or appears later")
                if fv > s.value:
                    raise ContractError(f"face {face} has value {fv} > {s.value} of {s.vertices}")
        seen[s.vertices] = s.value


def _reduce(columns: list[int]) -> tuple[list[tuple[int, int]], int]:
    """Column reduction over GF(2) on bitmask columns; returns (low, col) pairs and rank."""
    pivots: dict[int, int] = {}
    pairs = []
    for j, col in enumerate(columns):
        while col:
            low = col.bit_length() - 1
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                pairs.append((low, j))
                break
            col ^= other
    return pairs, len(pairs)


def _boundary_columns(cofaces: list[FilteredSimplex], face_index: dict[tuple[int, ...], int]) -> list[int]:
    cols = []
    for s in cofaces:
        v = s.vertices
        mask = 0
        for j in range(len(v)):
            mask |= 1 << face_index[v[:j] + v[j + 1:]]
        cols.append(mask)
    return cols


def compute_persistence(filtration: Filtration | Sequence[FilteredSimplex], feature_dim: int) -> PersistenceDiagram:
    """Finite persistence pairs of dimension ``feature_dim``.

    Zero-persistence pairs are dropped; classes without a death inside the
    filtration (including the essential component for k = 0) are discarded
    and counted in ``n_essential``.
    """
    simplices = filtration.simplices if isinstance(filtration, Filtration) else list(filtration)
    k = int(feature_dim)
    if k < 0:
        raise DomainError("feature_dim must be non-negative")
    _check_filtration(simplices)

    k_simplices = [s for s in simplices if s.dim == k]
    if not k_simplices:
        return PersistenceDiagram((), k)
    kp1 = [s for s in simplices if s.dim == k + 1]
    k_index = {s.vertices: i for i, s in enumerate(k_simplices)}
    pairs, n_pairs = _reduce(_boundary_columns(kp1, k_index))

    rank_k = 0
    if k > 0:
        positive = {low for low, _ in pairs}
        km1_index = {s.vertices: i for i, s in enumerate(simplices_of_dim(simplices, k - 1))}
        # clearing: simplices that kill a (k+1)-column are cycles, their columns reduce to zero
        cols = _boundary_columns([s for i, s in enumerate(k_simplices) if i not in positive], km1_index)
        _, rank_k = _reduce(cols)
    n_essential = len(k_simplices) - rank_k - n_pairs

    out = []
    n_zero = 0
    for low, j in pairs:
        b, d = k_simplices[low].value, kp1[j].value
        if d > b:
            out.append((b, d))
        else:
            n_zero += 1
    return PersistenceDiagram(out, k, n_essential=n_essential, n_zero_persistence=n_zero)


def simplices_of_dim(simplices: Sequence[FilteredSimplex], p: int) -> list[FilteredSimplex]:
    return [s for s in simplices if s.dim == p]


def diagram_of(cloud: PointCloud, feature_dim: int, max_radius: float | None = None) -> PersistenceDiagram:
    """Convenience: Čech persistence diagram of ``cloud`` in dimension ``feature_dim``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        filt = build_cech_filtration(cloud, feature_dim + 1, max_radius)
    return compute_persistence(filt, feature_dim)
