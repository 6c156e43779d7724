"""Monte Carlo simulation of the pivotal limit laws and their quantiles."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError
from .nugrid import NuGrid

__all__ = [
    "BrownianPath",
    "QuantileTable",
    "simulate_brownian_path",
    "brownian_paths",
    "frechet_limit_functional",
    "inco_limit_functional",
    "limit_draws",
    "estimate_quantile",
    "quantile_table",
    "table_from_draws",
    "order_statistic_se",
    "simulate_donsker_limit",
    "donsker_covariance",
]

VARIANTS = ("frechet", "inco")
CHUNK = 10_000
_Z = 1.959963984540054


@dataclass
class BrownianPath:
    steps: int
    values: np.ndarray
    seed: int | None = None

    def at(self, s) -> np.ndarray:
        idx = np.floor(np.round(np.asarray(s, dtype=float) * self.steps, 9)).astype(np.intp)
        return self.values[idx]


def brownian_paths(rng: np.random.Generator, R: int, N: int) -> np.ndarray:
    """R standard Brownian paths on {0, 1/N, ..., 1}; shape (R, N + 1)."""
    out = np.zeros((R, N + 1))
    np.cumsum(rng.standard_normal((R, N)) * math.sqrt(1.0 / N), axis=1, out=out[:, 1:])
    return out


def simulate_brownian_path(N: int, seed: int | None = None) -> BrownianPath:
    if N < 2:
        raise DomainError("need at least 2 steps")
    rng = np.random.default_rng(seed)
    return BrownianPath(N, brownian_paths(rng, 1, N)[0], seed)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    zero = den == 0
    out = np.where(zero & (num == 0), np.nan, out)
    return np.where(zero & (num != 0), np.copysign(np.inf, num), out)


def _grid_values(paths: np.ndarray, nu: NuGrid) -> tuple[np.ndarray, np.ndarray]:
    N = paths.shape[-1] - 1
    if N < nu.size:
        raise DomainError(f"path resolution N={N} is coarser than the integration grid G={nu.size}")
    return paths[..., nu.counts(N)], paths[..., N]


def frechet_limit_functional(path: BrownianPath | np.ndarray, nu: NuGrid) -> float:
    """B(1) / sqrt(int s^2 (B(s) - s B(1))^2 nu(ds)).

    Returns +-inf when only the denominator vanishes and nan when both do.
    """
    values = path.values if isinstance(path, BrownianPath) else np.asarray(path, dtype=float)
    Bs, B1 = _grid_values(values, nu)
    s = nu.points
    den = math.sqrt(nu.integrate(s**2 * (Bs - s * B1) ** 2))
    return float(_ratio(B1, den))


def inco_limit_functional(path: BrownianPath | np.ndarray, nu: NuGrid) -> float:
    """2 B(1) / sqrt(double integral of [st(t B(s) + s B(t) - 2 st B(1))]^2 over the product grid)."""
    values = path.values if isinstance(path, BrownianPath) else np.asarray(path, dtype=float)
    Bs, B1 = _grid_values(values, nu)
    s = nu.points[:, None]
    t = nu.points[None, :]
    integrand = (s * t * (t * Bs[:, None] + s * Bs[None, :] - 2 * s * t * B1)) ** 2
    den = math.sqrt(nu.integrate2(integrand))
    return float(_ratio(2 * B1, den))


def _frechet_batch(paths: np.ndarray, nu: NuGrid) -> np.ndarray:
    Bs, B1 = _grid_values(paths, nu)
    s = nu.points
    den = np.sqrt(((s**2) * (Bs - s * B1[:, None]) ** 2) @ nu.weights)
    return _ratio(B1, den)


def _inco_batch(paths: np.ndarray, nu: NuGrid) -> np.ndarray:
    # the product measure lets the double integral factor:
    # 2 * (sum w s^2 f^2)(sum w t^4) + 2 * (sum w s^3 f)^2 with f(s) = B(s) - s B(1)
    Bs, B1 = _grid_values(paths, nu)
    s, w = nu.points, nu.weights
    f = Bs - s * B1[:, None]
    A = (s**2 * f**2) @ w
    C = float(np.dot(w, s**4))
    Bm = (s**3 * f) @ w
    den = np.sqrt(np.maximum(2 * A * C + 2 * Bm**2, 0.0))
    return _ratio(2 * B1, den)


_BATCH = {"frechet": _frechet_batch, "inco": _inco_batch}


def limit_draws(variant: str, R: int, N: int, nu: NuGrid, seed: int, threads: int | None = 1) -> np.ndarray:
    """R draws of the limit functional.  Chunks use spawned seeds, so the
    result does not depend on ``threads``."""
    if variant not in _BATCH:
        raise DomainError(f"unknown variant {variant!r}")
    sizes = [CHUNK] * (R // CHUNK) + ([R % CHUNK] if R % CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    fn = _BATCH[variant]

    def run(args):
        size, seq = args
        return fn(brownian_paths(np.random.default_rng(seq), size, N), nu)

    jobs = list(zip(sizes, seqs))
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts) if parts else np.empty(0)


def order_statistic_se(sorted_draws: np.ndarray, p: float) -> float:
    """Standard error of the empirical p-quantile from a binomial order-statistic interval."""
    R = sorted_draws.size
    half = _Z * math.sqrt(R * p * (1 - p))
    j = max(int(math.floor(R * p - half)), 0)
    k = min(int(math.ceil(R * p + half)), R - 1)
    return float((sorted_draws[k] - sorted_draws[j]) / (2 * _Z))


@dataclass
class QuantileTable:
    variant: str
    alphas: list[float]
    quantiles: list[float]
    standard_errors: list[float]
    replications: int
    steps: int
    nu: dict
    seed: int
    n_degenerate: int = 0
    schema: str = "persistest.quantile_table/1"

    @property
    def nu_checksum(self) -> str:
        return self.nu["checksum"]

    def key(self) -> str:
        return f"{self.variant}-{self.nu_checksum}-N{self.steps}-R{self.replications}-s{self.seed}"

    def lookup(self, alpha: float) -> tuple[float, float]:
        for a, q, se in zip(self.alphas, self.quantiles, self.standard_errors):
            if math.isclose(a, alpha, rel_tol=0, abs_tol=1e-12):
                return q, se
        raise KeyError(f"alpha={alpha} not in table {self.key()}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["key"] = self.key()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileTable":
        d = dict(d)
        d.pop("key", None)
        return cls(**d)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "QuantileTable":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise InputError(f"cannot read quantile table {path}: {exc}") from exc


def quantile_table(
    variant: str,
    alphas,
    R: int = 100_000,
    N: int = 1_000,
    nu: NuGrid | None = None,
    seed: int = 0,
    threads: int | None = 1,
) -> QuantileTable:
    nu = nu or NuGrid()
    alphas = sorted({float(a) for a in alphas}, reverse=True)
    for a in alphas:
        if not 0 < a < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {a}")
    return table_from_draws(variant, alphas, limit_draws(variant, R, N, nu, seed, threads), N, nu, seed)


def table_from_draws(variant: str, alphas, draws: np.ndarray, N: int, nu: NuGrid, seed: int) -> QuantileTable:
    """Summarize already simulated draws; non-finite draws are counted and dropped."""
    alphas = sorted({float(a) for a in alphas}, reverse=True)
    R = int(draws.size)
    finite = np.isfinite(draws)
    x = np.sort(draws[finite])
    if x.size == 0:
        raise DomainError("every simulated draw was degenerate")
    qs = [float(np.quantile(x, 1 - a)) for a in alphas]
    ses = [order_statistic_se(x, 1 - a) for a in alphas]
    return QuantileTable(variant, alphas, qs, ses, R, N, nu.to_dict(), int(seed), int((~finite).sum()))


def estimate_quantile(
    variant: str,
    alpha: float,
    R: int = 100_000,
    N: int = 1_000,
    nu: NuGrid | None = None,
    seed: int = 0,
    threads: int | None = 1,
) -> QuantileTable:
    """Single-alpha table: empirical (1 - alpha)-quantile of R functional draws, with its SE."""
    return quantile_table(variant, [alpha], R, N, nu, seed, threads)


def donsker_covariance(s, t, u, v, gamma: float) -> np.ndarray:
    """Cov(Y(s,t), Y(u,v)) for Y(s,t) = t W(s) + s W(t), W = sqrt(gamma) B."""
    m = np.minimum
    return gamma * (t * v * m(s, u) + t * u * m(s, v) + s * v * m(t, u) + s * u * m(t, v))


def simulate_donsker_limit(grid, gamma: float, seed: int | None = None) -> np.ndarray:
    """One draw of Y(s, t) = t W(s) + s W(t) on grid x grid, from a single Brownian path."""
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    grid = np.asarray(grid, dtype=float)
    order = np.argsort(grid)
    pts = grid[order]
    rng = np.random.default_rng(seed)
    incr = np.diff(np.concatenate([[0.0], pts]))
    B = np.empty_like(grid)
    B[order] = np.cumsum(rng.standard_normal(pts.size) * np.sqrt(incr))
    W = math.sqrt(gamma) * B
    return grid[None, :] * W[:, None] + grid[:, None] * W[None, :]
