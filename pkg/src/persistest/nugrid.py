"""Discrete integration measure shared by self-normalizers and limit functionals."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["NuGrid"]


@dataclass(frozen=True, eq=False)
class NuGrid:
    """Probability weights on the points {1/G, 2/G, ..., 1}.

    The two-parameter measure is always the product of this grid with itself.
    Prefix lengths are computed in integer arithmetic, so floor(m * k / G) is
    exact for every sample size m.
    """

    size: int = 100
    weights: np.ndarray | None = None

    def __post_init__(self):
        G = int(self.size)
        if G < 2:
            raise DomainError("the integration grid needs at least 2 points")
        w = np.full(G, 1.0 / G) if self.weights is None else np.asarray(self.weights, dtype=float).copy()
        if w.shape != (G,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise DomainError("grid weights must be a non-negative probability vector of length G")
        w.setflags(write=False)
        object.__setattr__(self, "size", G)
        object.__setattr__(self, "weights", w)

    @property
    def index(self) -> np.ndarray:
        return np.arange(1, self.size + 1)

    @property
    def points(self) -> np.ndarray:
        return self.index / self.size

    def counts(self, m: int) -> np.ndarray:
        """floor(m * s) at every grid point s."""
        return (int(m) * self.index) // self.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def integrate2(self, values) -> float:
        return float(self.weights @ np.asarray(values) @ self.weights)

    @property
    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(b"nu-grid-v1")
        h.update(np.int64(self.size).tobytes())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        uniform = bool(np.all(self.weights == 1.0 / self.size))
        d = {"size": self.size, "checksum": self.checksum, "uniform": uniform}
        if not uniform:
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NuGrid":
        return cls(int(d["size"]), d.get("weights"))
