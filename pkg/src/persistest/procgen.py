"""Synthetic stationary point-cloud processes with finite-order moving-average dependence.

Cloud t has points

    x_{t,j} = clip(base_j + scale * sum_{l=0}^{q} w_l eps_{t-l,j}, 0, 1)

with iid innovations eps uniform on [-1, 1]^d.  Each cloud is a function of
(eps_t, ..., eps_{t-q}), so the process is a Bernoulli shift and q-dependent;
its m-dependent coupling coincides with the original for every m > q.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .cech import PointCloud
from .errors import DomainError
from .wasserstein import hausdorff_distance

__all__ = [
    "ProcessSpec",
    "generate_process",
    "coupling_distance",
    "make_paired_specs",
    "scalar_ma_process",
]

TOPOLOGIES = ("uniform-box", "noisy-circle")


@dataclass(frozen=True)
class ProcessSpec:
    kind: str = "iid"
    ma_order: int = 0
    points_per_cloud: int = 20
    dim: int = 2
    noise_scale: float = 0.05
    topology: str = "noisy-circle"
    seed: int = 0
    radius: float = 0.35

    def __post_init__(self):
        if self.kind not in ("iid", "ma"):
            raise DomainError(f"kind must be 'iid' or 'ma', got {self.kind!r}")
        if self.kind == "iid" and self.ma_order != 0:
            raise DomainError("an iid process has ma_order 0")
        if self.ma_order < 0:
            raise DomainError("ma_order must be non-negative")
        if self.points_per_cloud < 1:
            raise DomainError("points_per_cloud must be positive")
        if self.dim < 1:
            raise DomainError("dim must be positive")
        if self.topology not in TOPOLOGIES:
            raise DomainError(f"topology must be one of {TOPOLOGIES}")
        if self.topology == "noisy-circle" and self.dim < 2:
            raise DomainError("a circle needs dim >= 2")
        if not self.noise_scale >= 0:
            raise DomainError("noise_scale must be non-negative")
        if not 0 < self.radius <= 0.5:
            raise DomainError("radius must lie in (0, 0.5]")

    @property
    def order(self) -> int:
        return self.ma_order if self.kind == "ma" else 0

    @property
    def weights(self) -> np.ndarray:
        q = self.order
        return np.full(q + 1, 1.0 / math.sqrt(q + 1))

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def max_features(self, feature_dim: int) -> int:
        """Hard cap on the size of a diagram: every pair has its own birth simplex."""
        return math.comb(self.points_per_cloud, feature_dim + 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessSpec":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ProcessSpec":
        return cls.from_dict(json.loads(s))


def _base(spec: ProcessSpec) -> np.ndarray:
    N, d = spec.points_per_cloud, spec.dim
    base = np.full((N, d), 0.5)
    if spec.topology == "noisy-circle":
        theta = 2 * np.pi * np.arange(N) / N
        base[:, 0] += spec.radius * np.cos(theta)
        base[:, 1] += spec.radius * np.sin(theta)
    return base


def _amplitude(spec: ProcessSpec) -> float:
    # for uniform-box, scale 1 with q = 0 fills the unit cube exactly
    return 0.5 * spec.noise_scale if spec.topology == "uniform-box" else spec.noise_scale


def _cloud(spec: ProcessSpec, base: np.ndarray, innovations: np.ndarray) -> PointCloud:
    """innovations: (q+1, N, d), lag 0 first."""
    pts = base + _amplitude(spec) * np.tensordot(spec.weights, innovations, axes=1)
    return PointCloud(np.clip(pts, 0.0, 1.0), domain=spec.domain)


def _innovations(rng: np.random.Generator, k: int, spec: ProcessSpec) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(k, spec.points_per_cloud, spec.dim))


def generate_process(spec: ProcessSpec, T: int) -> list[PointCloud]:
    """T consecutive clouds of the stationary process described by ``spec``."""
    if T < 1:
        raise DomainError("process length must be positive")
    q = spec.order
    rng = np.random.default_rng(spec.seed)
    eps = _innovations(rng, T + q, spec)  # eps[i] is innovation at time i - q
    base = _base(spec)
    clouds = []
    for t in range(T):
        window = eps[t : t + q + 1][::-1]
        clouds.append(_cloud(spec, base, window))
    return clouds


def coupling_distance(spec: ProcessSpec, m: int, T: int = 200, r: float = 2.0, seed: int | None = None) -> float:
    """Monte Carlo estimate of E[d_H(X_0, X_0^(m))^r]^(1/r).

    X_0^(m) keeps the innovations at lags 0..m-1 and replaces all older ones
    by an independent copy.
    """
    if m < 1:
        raise DomainError("coupling lag must be at least 1")
    q = spec.order
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    base = _base(spec)
    total = 0.0
    for _ in range(T):
        eps = _innovations(rng, q + 1, spec)
        fresh = _innovations(rng, q + 1, spec)
        coupled = eps.copy()
        coupled[m:] = fresh[m:]
        X, Xm = _cloud(spec, base, eps), _cloud(spec, base, coupled)
        total += hausdorff_distance(X, Xm) ** r
    return (total / T) ** (1.0 / r)


def make_paired_specs(effect: float, base: ProcessSpec | None = None) -> tuple[ProcessSpec, ProcessSpec]:
    """X/Y specs identical except that Y's noise scale is larger by ``effect``.

    Seeds are left equal; callers drawing independent samples reseed each side.
    """
    if not effect >= 0:
        raise DomainError("effect must be non-negative")
    base = base or ProcessSpec()
    return base, replace(base, noise_scale=base.noise_scale + effect)


def scalar_ma_process(n: int, weights=(1.0, 0.5, 0.25), rng: np.random.Generator | None = None) -> np.ndarray:
    """Bounded scalar MA(q) series sum_l w_l eps_{t-l} with eps uniform on [-1, 1]."""
    rng = rng or np.random.default_rng()
    w = np.asarray(weights, dtype=float)
    eps = rng.uniform(-1.0, 1.0, n + w.size - 1)
    return np.convolve(eps, w, mode="valid")
