import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistest.cech import PersistenceDiagram
from persistest.errors import DomainError
from persistest.procgen import ProcessSpec, generate_process
from persistest.selfnorm import diagrams_of
from persistest.frechet import (
    PartialSumPath,
    estimate_frechet_mean,
    frechet_function,
    prefix_discrepancy,
    variance_partial_sum,
)
from persistest.ustats import inco_variance
from persistest.wasserstein import distance_matrix

from oracles import single_point_frechet_grid

A, B = [(0.0, 2.0)], [(0.0, 4.0)]
EMPTY = np.empty((0, 2))


def test_frechet_function_examples():
    D = [(0.1, 0.5), (0.2, 0.9)]
    assert frechet_function(D, [D] * 4) == 0.0
    assert frechet_function([(0.0, 3.0)], [A, B]) == 1.0
    assert frechet_function(EMPTY, [A, B]) == 2.5
    with pytest.raises(DomainError):
        frechet_function(D, [])


def test_mean_of_two_single_points():
    est = estimate_frechet_mean([A, B], r=2)
    assert est.mean.pairs.tolist() == [[0.0, 3.0]]
    assert est.variance == 1.0
    assert est.converged and not est.heuristic


def test_copies_are_a_fixed_point():
    D = PersistenceDiagram([(0.1, 0.5), (0.2, 0.9), (0.3, 0.35)], 1)
    est = estimate_frechet_mean([D] * 5)
    assert est.mean == D
    assert est.variance == 0.0


def test_all_empty_sample():
    est = estimate_frechet_mean([EMPTY, EMPTY, EMPTY])
    assert len(est.mean) == 0
    assert est.variance == 0.0


def test_argument_errors():
    with pytest.raises(DomainError):
        estimate_frechet_mean([])
    with pytest.raises(DomainError):
        estimate_frechet_mean([A, B], r=1.5)
    with pytest.raises(DomainError):
        estimate_frechet_mean([A, B], init_strategy="random")


def _random_sample(rng, m=12, max_pts=6):
    return [np.sort(rng.uniform(size=(rng.integers(0, max_pts + 1), 2)), axis=1) for _ in range(m)]


def test_trace_non_increasing_and_variance_consistent():
    rng = np.random.default_rng(2)
    for _ in range(5):
        S = _random_sample(rng)
        est = estimate_frechet_mean(S)
        assert all(b <= a for a, b in zip(est.objective_trace, est.objective_trace[1:]))
        assert est.variance == est.objective_trace[-1]
        assert est.variance == pytest.approx(frechet_function(est.mean, S), abs=1e-15)


def test_max_iter_exhaustion_reports_not_converged():
    rng = np.random.default_rng(8)
    S = _random_sample(rng, m=20)
    full = estimate_frechet_mean(S, init_strategy="first")
    assert full.n_iter > 1
    short = estimate_frechet_mean(S, init_strategy="first", max_iter=1)
    assert not short.converged
    assert short.n_iter == 1


def test_higher_order_is_flagged_heuristic():
    est = estimate_frechet_mean([A, B, [(0.5, 1.0)]], r=5)
    assert est.heuristic
    assert est.variance == pytest.approx(frechet_function(est.mean, [A, B, [(0.5, 1.0)]], 5))


def test_precomputed_distances_give_same_result():
    rng = np.random.default_rng(5)
    S = _random_sample(rng)
    est = estimate_frechet_mean(S)
    est2 = estimate_frechet_mean(S, distance_matrix=distance_matrix(S, 2.0))
    assert est2.mean == est.mean


def test_never_worse_than_best_sample_member():
    rng = np.random.default_rng(6)
    for _ in range(5):
        S = _random_sample(rng)
        medoid_value = min(frechet_function(D, S) for D in S)
        assert estimate_frechet_mean(S).variance <= medoid_value


@st.composite
def single_point_samples(draw):
    m = draw(st.integers(1, 3))
    out = []
    for _ in range(m):
        if draw(st.booleans()) and draw(st.booleans()):
            out.append(EMPTY)
            continue
        b, d = sorted(draw(st.lists(st.floats(0, 1), min_size=2, max_size=2, unique=True)))
        out.append(np.array([[b, d]]))
    return out


GRID = np.linspace(0.0, 1.0, 401)


@settings(max_examples=80, deadline=None)
@given(single_point_samples())
def test_matches_grid_optimum_on_tiny_samples(S):
    # the grid minimum can only overestimate the true one
    grid_best, empty_value = single_point_frechet_grid(S, GRID)
    est = estimate_frechet_mean(S)
    assert est.variance <= min(grid_best, empty_value) + 1e-6


def test_matches_grid_optimum_seeded():
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 1.0, 801)
    for _ in range(150):
        m = rng.integers(1, 4)
        S = [np.sort(rng.uniform(size=(1, 2)), axis=1) if rng.uniform() < 0.85 else EMPTY for _ in range(m)]
        grid_best, empty_value = single_point_frechet_grid(S, grid)
        assert estimate_frechet_mean(S).variance <= min(grid_best, empty_value) + 1e-6


# -- partial-sum path --------------------------------------------------------


def test_partial_sum_example():
    path = variance_partial_sum([A, B], [(0.0, 3.0)])
    assert path.values.tolist() == [1.0, 1.0]
    assert path(0.4) == 0.0
    assert path(0.5) == 1.0
    assert path(1.0) == frechet_function([(0.0, 3.0)], [A, B])


def test_partial_sum_identical_diagrams():
    D = [(0.1, 0.4)]
    assert np.all(variance_partial_sum([D] * 6, D).values == 0)


def test_partial_sum_depends_only_on_prefix():
    rng = np.random.default_rng(1)
    S = _random_sample(rng, m=10)
    mean = estimate_frechet_mean(S).mean
    full = variance_partial_sum(S, mean)
    changed = S[:6] + _random_sample(rng, m=4)
    other = variance_partial_sum(changed, mean)
    assert np.array_equal(full.values[:6], other.values[:6])
    assert full(0.6) == other(0.6)
    s = np.array([0.0, 0.05, 0.1, 0.55, 1.0])
    assert full(s).tolist() == [0.0, 0.0, full.values[0], full.values[4], full.values[9]]


def test_partial_sum_path_validation():
    with pytest.raises(DomainError):
        PartialSumPath.from_sq_distances([])
    p = PartialSumPath.from_sq_distances([1.0, 3.0, 2.0])
    assert p.values.tolist() == [1.0, 2.0, 2.0]
    assert p.grid.tolist() == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_prefix_discrepancy():
    rng = np.random.default_rng(3)
    S = _random_sample(rng, m=16)
    mean = estimate_frechet_mean(S).mean
    assert prefix_discrepancy(S, mean, mean) == 0.0
    assert prefix_discrepancy(S, mean, EMPTY) > 0.0


# -- sandwich between inco- and Frechet variance ------------------------------


def test_sandwich_on_iid_samples(circle_diagram_samples):
    for S in circle_diagram_samples:
        dm = distance_matrix(S, 2.0)
        V = estimate_frechet_mean(S, distance_matrix=dm).variance
        sigma2 = inco_variance(S, distances=dm)
        m = len(S)
        mean_pairwise = dm[np.triu_indices(m, 1)].mean()
        assert V - mean_pairwise**2 <= sigma2 <= 2 * V + 1e-6


# -- strong law on a dependent process ----------------------------------------

# V_hat(1) for the same process at m = 25600 (seed 999), computed once offline
LONG_RUN_V = 0.00417435356236952


def _ma2_variance(m, seed):
    spec = ProcessSpec(kind="ma", ma_order=2, points_per_cloud=4, noise_scale=0.15, seed=seed)
    S = diagrams_of(generate_process(spec, m), 0)
    return estimate_frechet_mean(S, init_strategy="first").variance


def test_variance_estimate_settles_as_m_grows():
    err = [np.mean([abs(_ma2_variance(m, s) - LONG_RUN_V) for s in range(8)]) for m in (100, 400, 1600)]
    assert err[0] > err[1] > err[2]
