"""Two-sample tests for the dispersion of persistence diagrams from Čech filtrations."""
from .cech import (
    FilteredSimplex,
    Filtration,
    PersistenceDiagram,
    PointCloud,
    build_cech_filtration,
    compute_persistence,
    diagram_of,
    min_enclosing_ball_radius,
)
from .errors import ContractError, DomainError, InputError, PersistestError, StageError
from .frechet import FrechetEstimate, PartialSumPath, estimate_frechet_mean, frechet_function, variance_partial_sum
from .limits import QuantileTable, estimate_quantile, quantile_table, simulate_brownian_path
from .nugrid import NuGrid
from .procgen import ProcessSpec, coupling_distance, generate_process, make_paired_specs
from .selfnorm import TestConfig, TestReport, run_two_sample_test, test_diagrams
from .ustats import (
    Kernel,
    TwoParamPath,
    hoeffding_decompose,
    inco_variance,
    kernel_matrix,
    u_partial_sum,
    u_statistic,
)
from .wasserstein import Matching, bottleneck_distance, distance_matrix, hausdorff_distance, wasserstein_distance

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
