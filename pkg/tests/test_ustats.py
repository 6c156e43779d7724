import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistest.cech import PointCloud, diagram_of
from persistest.errors import DomainError
from persistest.procgen import scalar_ma_process
from persistest.ustats import (
    Kernel,
    TwoParamPath,
    coefficient_a_n,
    coefficient_b_ni,
    degeneracy_check,
    half_squared_difference_kernel,
    hoeffding_decompose,
    holder_constant,
    inco_kernel,
    inco_kernel_bound,
    inco_partial_sums,
    inco_variance,
    kernel_matrix,
    product_kernel,
    u_partial_sum,
    u_statistic,
)
from persistest.wasserstein import hausdorff_distance, wasserstein_distance

from oracles import u_partial_brute


def const(c):
    return Kernel(lambda x, y: c, "const")


def test_u_statistic_examples():
    assert u_statistic([1.0, 2.0, 3.0], product_kernel()) == pytest.approx(11 / 3, abs=1e-15)
    assert u_statistic([0.3, -1.0, 7.0, 2.0], const(2.5)) == 2.5
    D = [(0.1, 0.6), (0.2, 0.3)]
    assert u_statistic([D, D, D], inco_kernel(2.0)) == 0.0
    with pytest.raises(DomainError):
        u_statistic([1.0], product_kernel())


def test_sample_variance_kernel():
    x = np.random.default_rng(0).normal(size=30)
    assert u_statistic(x, half_squared_difference_kernel()) == pytest.approx(np.var(x, ddof=1), rel=1e-12)


def test_kernel_matrix_is_symmetric_and_matches_pointwise():
    xs = list(np.random.default_rng(1).normal(size=6))
    k = product_kernel()
    slow = Kernel(k.func, "slow")
    H = kernel_matrix(xs, k)
    assert np.array_equal(H, H.T)
    assert np.allclose(H, kernel_matrix(xs, slow), rtol=0, atol=1e-15)
    assert np.all(np.diag(H) == 0)


def test_coefficients():
    for n in (2, 3, 7, 50):
        assert coefficient_a_n(n, 1, 1) == 1.0
    assert coefficient_a_n(4, 0.5, 1) == 0.5
    assert coefficient_b_ni(4, 1, 0.5) == pytest.approx(1 / 3)
    assert coefficient_a_n(4, 0.1, 1) == 0.0
    with pytest.raises(DomainError):
        coefficient_b_ni(4, 5, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.floats(0, 1), st.floats(0, 1))
def test_coefficients_count_pairs(n, s, t):
    a, b = math.floor(n * s + 1e-9), math.floor(n * t + 1e-9)
    pairs = sum(1 for i in range(a) for j in range(b) if i != j)
    assert coefficient_a_n(n, s, t) == pytest.approx(pairs / (n * (n - 1)), abs=1e-15)
    for i in range(1, n + 1):
        count = sum(1 for j in range(1, b + 1) if j != i)
        assert coefficient_b_ni(n, i, t) == pytest.approx(count / (n - 1), abs=1e-15)


def test_partial_sum_special_values():
    x = np.random.default_rng(2).normal(size=9)
    k = product_kernel()
    P = u_partial_sum(x, k)
    assert P(1, 1) == pytest.approx(u_statistic(x, k), rel=1e-13)
    assert P.total == P(1, 1)
    assert P(1 / 9, 1 / 9) == 0.0
    assert np.all(P.values[0, :] == 0) and np.all(P.values[:, 0] == 0)
    Pc = u_partial_sum(x, const(3.0))
    for s in P.grid:
        for t in P.grid:
            assert Pc(s, t) == pytest.approx(3.0 * coefficient_a_n(9, s, t), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_partial_sum_matches_double_loop(n, seed, s, t):
    x = np.random.default_rng(seed).normal(size=n)
    h = lambda a, b: math.cos(a - b) + a * b
    k = Kernel(h, "cos")
    assert u_partial_sum(x, k)(s, t) == pytest.approx(u_partial_brute(x, h, s, t), rel=1e-12, abs=1e-14)


def test_two_param_path_rejects_small_samples():
    with pytest.raises(DomainError):
        TwoParamPath.from_matrix(np.zeros((1, 1)))


# -- Hoeffding decomposition --------------------------------------------------


def test_hoeffding_constant_kernel():
    est = hoeffding_decompose([1.0, 2.0, 3.0], const(4.0), [0.0, 5.0])
    assert est.theta_hat == 4.0
    assert np.all(est.h1_values == 0)
    assert np.all(est.h2_values == 0)
    with pytest.raises(DomainError):
        hoeffding_decompose([1.0], const(1.0), [])


def test_hoeffding_identity_holds_exactly():
    rng = np.random.default_rng(3)
    x, ref = rng.normal(size=20), rng.normal(size=50)
    k = Kernel(lambda a, b: math.exp(-abs(a - b)), "laplace")
    est = hoeffding_decompose(x, k, ref)
    H = k.cross(x, x)
    rebuilt = est.theta_hat + est.h1_values[:, None] + est.h1_values[None, :] + est.h2_values
    assert np.max(np.abs(rebuilt - H)) <= 1e-15
    assert np.allclose(est.h2(x, x), est.h2_values, rtol=0, atol=1e-15)


def test_hoeffding_first_order_term_for_product_kernel():
    rng = np.random.default_rng(4)
    x, ref = rng.normal(size=200), rng.normal(size=10_000)
    est = hoeffding_decompose(x, product_kernel(), ref)
    # h1_hat(2) - 2 * mean(ref) = -theta_hat = -mean(x) mean(ref); delta-method SE
    xb, yb = x.mean(), ref.mean()
    se = math.sqrt(yb**2 * x.var(ddof=1) / x.size + xb**2 * ref.var(ddof=1) / ref.size
                   + x.var(ddof=1) * ref.var(ddof=1) / (x.size * ref.size))
    assert abs(est.h1([2.0])[0] - 2 * yb) <= 3 * se


def test_degenerate_part_has_zero_conditional_mean():
    rng = np.random.default_rng(5)
    est = hoeffding_decompose(rng.uniform(1, 2, 1000), product_kernel(), rng.uniform(1, 2, 5000))
    means, se = degeneracy_check(est, np.linspace(1, 2, 30))
    assert np.mean(np.abs(means) <= 3 * se) >= 0.95


def test_variance_decay_on_ma2():
    rng = np.random.default_rng(6)
    k = half_squared_difference_kernel()
    scaled = [n * np.var([u_statistic(scalar_ma_process(n, rng=rng), k) for _ in range(300)], ddof=1)
              for n in (50, 100, 200)]
    assert max(scaled) <= 2 * min(scaled)


def test_degenerate_part_second_moment_does_not_grow():
    rng = np.random.default_rng(7)
    k = half_squared_difference_kernel()
    est = hoeffding_decompose(scalar_ma_process(300, rng=rng), k, scalar_ma_process(10_000, rng=rng))
    scaled = []
    for n in (50, 100, 200):
        vals = []
        for _ in range(200):
            x = scalar_ma_process(n, rng=rng)
            H = est.h2(x, x)
            np.fill_diagonal(H, 0.0)
            vals.append(H.sum() / (n * (n - 1)))
        scaled.append(n * np.mean(np.square(vals)))
    assert scaled[1] <= 1.5 * scaled[0]
    assert scaled[2] <= 1.5 * scaled[0]


# -- inco-variance --------------------------------------------------------------


def test_inco_examples():
    assert inco_variance([[(0.0, 2.0)], [(0.0, 4.0)]], r=1) == 2.0
    D = [(0.1, 0.5)]
    assert np.all(inco_partial_sums([D] * 5).values == 0)
    with pytest.raises(DomainError):
        inco_variance([D])


def test_inco_path_matches_double_loop():
    rng = np.random.default_rng(8)
    S = [np.sort(rng.uniform(size=(rng.integers(0, 5), 2)), axis=1) for _ in range(7)]
    P = inco_partial_sums(S, r=2)
    h = lambda a, b: 0.5 * wasserstein_distance(a, b, 2)[0] ** 2
    for s, t in [(0.3, 0.9), (1, 1), (0.5, 0.5), (0.99, 0.15)]:
        assert P(s, t) == pytest.approx(u_partial_brute(S, h, s, t), rel=1e-12, abs=1e-15)
    assert P.total == pytest.approx(u_statistic(S, inco_kernel(2.0)), rel=1e-13)


def test_inco_kernel_bound():
    # k = 1, T = 3 points, unit square, r = 2: ((9 + 27) * 2) ** 0.5
    assert inco_kernel_bound(3, 1, 2.0, math.sqrt(2)) == pytest.approx(math.sqrt(72))
    rng = np.random.default_rng(9)
    T, k, r = 8, 1, 2.0
    bound = inco_kernel_bound(T, k, r, math.sqrt(2))
    h = inco_kernel(r)
    for _ in range(30):
        X = diagram_of(PointCloud(rng.uniform(size=(T, 2)), domain=(0, 1)), k)
        Y = diagram_of(PointCloud(rng.uniform(size=(T, 2)), domain=(0, 1)), k)
        assert h(X, Y) <= bound


def test_holder_constant():
    rng = np.random.default_rng(10)
    h = inco_kernel(2.0)
    vals, vals2, dists = [], [], []
    for _ in range(15):
        X, Y = rng.uniform(size=(8, 2)), rng.uniform(size=(8, 2))
        X2 = np.clip(X + rng.normal(scale=0.02, size=X.shape), 0, 1)
        Y2 = np.clip(Y + rng.normal(scale=0.02, size=Y.shape), 0, 1)
        dX = [diagram_of(PointCloud(c), 1) for c in (X, Y, X2, Y2)]
        vals.append(h(dX[0], dX[1]))
        vals2.append(h(dX[2], dX[3]))
        dists.append(hausdorff_distance(X, X2) + hausdorff_distance(Y, Y2))
    L = holder_constant(vals, vals2, dists, 1.0)
    assert 0 <= L < math.inf
    assert np.all(np.abs(np.subtract(vals, vals2)) <= L * np.asarray(dists) + 1e-12)
    assert holder_constant([1.0], [2.0], [0.0], 0.5) == math.inf
    with pytest.raises(DomainError):
        holder_constant([1.0], [1.0], [1.0], 1.5)
