"""Self-normalized two-sample tests for relevant differences in dispersion.

Two variants share the same decision rule W_hat = (D_hat^2 - delta) / V_hat > q:

* ``frechet`` compares Fréchet variances through the one-parameter process
  D(s) = s (V_X(s) - V_Y(s)) of prefix variance estimates;
* ``inco`` compares independent-copy variances through the two-parameter
  difference of U-statistic partial sums.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, fields
from functools import lru_cache

import numpy as np

from .cech import PersistenceDiagram, PointCloud, diagram_of
from .errors import DomainError, StageError
from .frechet import PartialSumPath, estimate_frechet_mean, prefix_discrepancy
from .limits import QuantileTable, quantile_table
from .nugrid import NuGrid
from .ustats import TwoParamPath
from .wasserstein import cross_distances, distance_matrix

__all__ = [
    "TestConfig",
    "TestReport",
    "DifferencePath",
    "DifferenceSurface",
    "frechet_difference_process",
    "frechet_self_normalizer",
    "frechet_test_statistic",
    "inco_difference_process",
    "inco_self_normalizer",
    "frechet_test_from_sq_distances",
    "inco_test_from_kernel_matrices",
    "resolve_quantile",
    "test_diagrams",
    "run_two_sample_test",
]

log = logging.getLogger(__name__)


@dataclass
class TestConfig:
    __test__ = False  # not a pytest class

    variant: str = "inco"
    r: float = 2.0
    feature_dim: int = 1
    delta: float = 0.0
    alpha: float = 0.05
    nu_grid: int = 100
    seed: int = 0
    quantile_source: str = "fresh-simulation"
    quantile_table: str | None = None
    replications: int = 100_000
    steps: int = 1_000
    max_radius: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.variant not in ("frechet", "inco"):
            raise DomainError(f"variant must be 'frechet' or 'inco', got {self.variant!r}")
        if not self.delta >= 0:
            raise DomainError("delta must be non-negative")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.nu_grid < 2:
            raise DomainError("nu_grid must be at least 2")
        if self.quantile_source not in ("table", "fresh-simulation"):
            raise DomainError("quantile_source must be 'table' or 'fresh-simulation'")
        if self.quantile_source == "table" and not self.quantile_table:
            raise DomainError("quantile_source='table' needs a quantile_table path")
        if not self.r >= 1:
            raise DomainError("Wasserstein order must be >= 1")

    def nu(self) -> NuGrid:
        return NuGrid(self.nu_grid)


@dataclass
class TestReport:
    __test__ = False

    variant: str
    D_hat: float
    D_hat_sq: float
    V_hat: float
    W_hat: float
    q_alpha: float
    reject: bool
    degenerate: bool
    delta: float
    alpha: float
    diagnostics: dict = field(default_factory=dict)
    # DifferencePath or DifferenceSurface; kept for plotting, not serialized
    process: object = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return _jsonable({f.name: getattr(self, f.name) for f in fields(self) if f.name != "process"})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class DifferencePath:
    points: np.ndarray
    values: np.ndarray
    D_hat: float


@dataclass
class DifferenceSurface:
    points: np.ndarray
    values: np.ndarray
    D_hat: float


# ---------------------------------------------------------------------------
# Fréchet-variance variant


def frechet_difference_process(pathX: PartialSumPath, pathY: PartialSumPath, nu: NuGrid) -> DifferencePath:
    s = nu.points
    vx = pathX.at_counts(nu.counts(pathX.m))
    vy = pathY.at_counts(nu.counts(pathY.m))
    D_hat = float(pathX.values[-1] - pathY.values[-1])
    return DifferencePath(s, s * (vx - vy), D_hat)


def frechet_self_normalizer(D: DifferencePath, nu: NuGrid) -> float:
    """sqrt of the nu-average of (D(s)^2 - s^2 D(1)^2)^2."""
    s = nu.points
    return math.sqrt(nu.integrate((D.values**2 - s**2 * D.D_hat**2) ** 2))


def frechet_test_statistic(D_hat_sq: float, V_hat: float, delta: float) -> float:
    """(D_hat^2 - delta) / V_hat.

    With V_hat = 0 the ratio degenerates; the returned +inf, -inf or 0.0 keeps
    the sign of D_hat^2 - delta so that ``W > q`` still decides correctly.
    """
    if V_hat < 0:
        raise DomainError("the self-normalizer is non-negative")
    diff = D_hat_sq - delta
    if V_hat == 0:
        return math.copysign(math.inf, diff) if diff != 0 else 0.0
    return diff / V_hat


# ---------------------------------------------------------------------------
# inco-variance variant


def inco_difference_process(pathX: TwoParamPath, pathY: TwoParamPath, nu: NuGrid) -> DifferenceSurface:
    cx, cy = nu.counts(pathX.n), nu.counts(pathY.n)
    values = pathX.at_counts(cx, cx) - pathY.at_counts(cy, cy)
    return DifferenceSurface(nu.points, values, pathX.total - pathY.total)


def inco_self_normalizer(D: DifferenceSurface, nu: NuGrid) -> float:
    st = np.outer(nu.points, nu.points)
    return math.sqrt(nu.integrate2((D.values**2 - (st * D.D_hat) ** 2) ** 2))


# ---------------------------------------------------------------------------
# quantiles


@lru_cache(maxsize=16)
def _fresh_table(variant: str, alpha: float, R: int, N: int, G: int, seed: int, threads: int) -> QuantileTable:
    return quantile_table(variant, [alpha], R, N, NuGrid(G), seed, threads)


def resolve_quantile(config: TestConfig, nu: NuGrid | None = None) -> tuple[float, dict]:
    """The (1 - alpha)-quantile for ``config`` plus metadata of the table it came from."""
    nu = nu or config.nu()
    if config.quantile_source == "table":
        table = QuantileTable.load(config.quantile_table)
        if table.variant != config.variant:
            raise DomainError(f"quantile table is for variant {table.variant!r}, not {config.variant!r}")
        if table.nu_checksum != nu.checksum:
            raise DomainError(
                f"quantile table grid checksum {table.nu_checksum} does not match test grid {nu.checksum}"
            )
    else:
        if nu.checksum != NuGrid(nu.size).checksum:
            table = quantile_table(config.variant, [config.alpha], config.replications, config.steps, nu, config.seed)
        else:
            table = _fresh_table(
                config.variant, float(config.alpha), int(config.replications), int(config.steps),
                nu.size, int(config.seed), int(config.threads),
            )
    q, se = table.lookup(config.alpha)
    meta = {"key": table.key(), "source": config.quantile_source, "se": se,
            "nu_checksum": table.nu_checksum, "n_degenerate": table.n_degenerate}
    return q, meta


def _decide(variant, D, V_hat, config: TestConfig, q, qmeta, nu, extra) -> TestReport:
    D_hat = D.D_hat
    D_sq = D_hat**2
    W = frechet_test_statistic(D_sq, V_hat, config.delta)
    degenerate = V_hat == 0
    diagnostics = {"nu_checksum": nu.checksum, "nu_size": nu.size, "quantile": qmeta, "seed": config.seed}
    diagnostics.update(extra)
    return TestReport(
        variant, D_hat, D_sq, V_hat, W, q, bool(W > q), degenerate, config.delta, config.alpha, diagnostics, D
    )


def _balance(m: int, n: int) -> dict:
    tau = m / (m + n)
    if not 0.1 <= tau <= 0.9:
        warnings.warn(f"unbalanced samples: m/(m+n) = {tau:.3f}", RuntimeWarning, stacklevel=3)
    return {"m": m, "n": n, "tau": tau}


def frechet_test_from_sq_distances(x_sq, y_sq, config: TestConfig, quantile: float | None = None) -> TestReport:
    """Fréchet-variance test from the squared distances of each observation to its sample's mean."""
    nu = config.nu()
    px, py = PartialSumPath.from_sq_distances(x_sq), PartialSumPath.from_sq_distances(y_sq)
    D = frechet_difference_process(px, py, nu)
    V = frechet_self_normalizer(D, nu)
    if quantile is None:
        quantile, qmeta = resolve_quantile(config, nu)
    else:
        qmeta = {"source": "given"}
    extra = _balance(px.m, py.m)
    extra.update(V_X=float(px.values[-1]), V_Y=float(py.values[-1]))
    return _decide("frechet", D, V, config, quantile, qmeta, nu, extra)


def inco_test_from_kernel_matrices(HX, HY, config: TestConfig, quantile: float | None = None) -> TestReport:
    """Inco-variance test from the kernel matrices [h(X_i, X_j)] and [h(Y_i, Y_j)]."""
    nu = config.nu()
    px, py = TwoParamPath.from_matrix(HX), TwoParamPath.from_matrix(HY)
    D = inco_difference_process(px, py, nu)
    V = inco_self_normalizer(D, nu)
    if quantile is None:
        quantile, qmeta = resolve_quantile(config, nu)
    else:
        qmeta = {"source": "given"}
    extra = _balance(px.n, py.n)
    extra.update(sigma2_X=px.total, sigma2_Y=py.total)
    return _decide("inco", D, V, config, quantile, qmeta, nu, extra)


# ---------------------------------------------------------------------------
# full pipeline


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _frechet_side(diagrams, r, dm):
    est = estimate_frechet_mean(diagrams, r, distance_matrix=dm)
    sq = cross_distances(diagrams, est.mean, r) ** 2
    half = len(diagrams) // 2
    rate = None
    if half >= 2:
        est_half = estimate_frechet_mean(diagrams[:half], r)
        rate = prefix_discrepancy(diagrams, est.mean, est_half.mean, r)
    return est, sq, rate


def test_diagrams(
    diagramsX,
    diagramsY,
    config: TestConfig,
    distancesX: np.ndarray | None = None,
    distancesY: np.ndarray | None = None,
) -> TestReport:
    """Run the configured test on two samples of persistence diagrams.

    Precomputed pairwise W_r matrices may be passed to skip the dominant cost.
    """
    m, n = len(diagramsX), len(diagramsY)
    min_size = 5 if config.variant == "frechet" else 2
    if m < min_size or n < min_size:
        raise DomainError(f"the {config.variant} test needs at least {min_size} diagrams per sample")
    r = config.r
    if distancesX is None:
        distancesX = _stage("distances", distance_matrix, diagramsX, r, config.threads)
    if distancesY is None:
        distancesY = _stage("distances", distance_matrix, diagramsY, r, config.threads)

    if config.variant == "inco":
        report = _stage("statistic", inco_test_from_kernel_matrices, 0.5 * distancesX**2, 0.5 * distancesY**2, config)
    else:
        ex, sqx, rate_x = _stage("frechet_mean", _frechet_side, diagramsX, r, distancesX)
        ey, sqy, rate_y = _stage("frechet_mean", _frechet_side, diagramsY, r, distancesY)
        report = _stage("statistic", frechet_test_from_sq_distances, sqx, sqy, config)
        report.diagnostics["frechet"] = {
            "converged_X": ex.converged, "converged_Y": ey.converged,
            "iterations_X": ex.n_iter, "iterations_Y": ey.n_iter,
            "heuristic": ex.heuristic, "mean_size_X": len(ex.mean), "mean_size_Y": len(ey.mean),
            "prefix_discrepancy_X": rate_x, "prefix_discrepancy_Y": rate_y,
        }
    report.diagnostics["r"] = r
    report.diagnostics["feature_dim"] = config.feature_dim
    report.diagnostics["discarded_essential_X"] = int(sum(d.n_essential for d in diagramsX if isinstance(d, PersistenceDiagram)))
    report.diagnostics["discarded_essential_Y"] = int(sum(d.n_essential for d in diagramsY if isinstance(d, PersistenceDiagram)))
    return report


def diagrams_of(clouds, feature_dim: int, max_radius: float | None = None) -> list[PersistenceDiagram]:
    return [diagram_of(c if isinstance(c, PointCloud) else PointCloud(c), feature_dim, max_radius) for c in clouds]


def run_two_sample_test(cloudsX, cloudsY, config: TestConfig) -> TestReport:
    """Full pipeline: Čech persistence of every cloud, then :func:`test_diagrams`."""
    dx = _stage("persistence", diagrams_of, cloudsX, config.feature_dim, config.max_radius)
    dy = _stage("persistence", diagrams_of, cloudsY, config.feature_dim, config.max_radius)
    return test_diagrams(dx, dy, config)
