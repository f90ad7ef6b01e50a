import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import assignment_gap, brute_force_assignment, entropic_plan_oracle
from rankot.errors import ConvergenceError, InvalidArgumentError
from rankot.halton import halton_grid
from rankot.transport import (assignment_potentials, cost_matrix, marginal_violation, sinkhorn,
                              solve_assignment, transport_cost_vjp)


def test_cost_matrix_examples():
    np.testing.assert_allclose(cost_matrix([[0.0, 0.0]], [[0.5, 0.5]]), [[0.5]])
    np.testing.assert_allclose(cost_matrix([[1, 0], [0, 1]], [[1, 0], [0, 1]]), [[0, 2], [2, 0]])


def test_cost_matrix_double_loop():
    rng = np.random.default_rng(1)
    x, h = rng.normal(size=(5, 3)), halton_grid(5, 3).points
    expected = [[sum((x[i, k] - h[j, k]) ** 2 for k in range(3)) for j in range(5)]
                for i in range(5)]
    np.testing.assert_allclose(cost_matrix(x, h), expected, rtol=1e-14)


def test_cost_matrix_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        cost_matrix(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(InvalidArgumentError):
        cost_matrix(np.zeros((3, 2)), np.zeros((3, 3)))


def test_assignment_examples():
    assert list(solve_assignment([[0, 2], [2, 0]])) == [0, 1]
    assert list(solve_assignment([[1, 1], [1, 1]])) == [0, 1]
    assert list(solve_assignment([[5.0]])) == [0]


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), [[0, np.inf], [1, 0]], [[np.nan, 0], [0, 0]]])
def test_assignment_rejects_bad_costs(bad):
    with pytest.raises(InvalidArgumentError):
        solve_assignment(bad)


@pytest.mark.parametrize("seed", range(30))
def test_assignment_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    c = rng.random((n, n))
    best, perm = brute_force_assignment(c)
    sigma = solve_assignment(c)
    assert c[np.arange(n), sigma].sum() == pytest.approx(best, abs=1e-12)
    assert np.array_equal(sigma, perm)


@pytest.mark.parametrize("seed", range(20))
def test_assignment_lexicographic_ties(seed):
    # small integer costs have many exactly tied optima
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 7))
    c = rng.integers(0, 3, size=(n, n)).astype(float)
    best, perm = brute_force_assignment(c)
    sigma = solve_assignment(c)
    assert c[np.arange(n), sigma].sum() == best
    assert np.array_equal(sigma, perm)


def test_assignment_with_duplicate_points():
    x = np.array([[0.2, 0.2], [0.2, 0.2], [0.9, 0.1], [0.2, 0.2]])
    h = halton_grid(4, 2).points
    c = cost_matrix(x, h)
    best, perm = brute_force_assignment(c)
    assert np.array_equal(solve_assignment(c), perm)


def test_assignment_potentials_are_dual_feasible():
    rng = np.random.default_rng(3)
    c = rng.random((30, 30))
    sigma = solve_assignment(c)
    u, v = assignment_potentials(c, sigma)
    assert np.all(c - u[:, None] - v[None, :] >= -1e-12)
    assert np.allclose(c[np.arange(30), sigma], u + v[sigma], atol=1e-12)


def test_sinkhorn_trivial_cases():
    assert np.array_equal(sinkhorn([[3.7]], 0.1).weights, [[1.0]])
    p = sinkhorn([[0, 1], [1, 0]], 1e6).weights
    np.testing.assert_allclose(p, 0.25, atol=1e-3)


@pytest.mark.parametrize("seed", range(8))
def test_sinkhorn_matches_convex_oracle(seed):
    rng = np.random.default_rng(seed)
    c = rng.random((4, 4))
    plan = sinkhorn(c, 0.05)
    np.testing.assert_allclose(plan.weights, entropic_plan_oracle(c, 0.05), atol=1e-6)
    assert plan.violation <= 1e-9


@pytest.mark.parametrize("method", ["newton", "scaling"])
def test_sinkhorn_methods_agree(method):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(60, 2))
    c = cost_matrix(x, halton_grid(60, 2))
    plan = sinkhorn(c, 0.1, method=method)
    ref = sinkhorn(c, 0.1, method="newton")
    assert marginal_violation(plan.weights) <= 1e-9
    np.testing.assert_allclose(plan.weights, ref.weights, atol=1e-9)


def test_sinkhorn_potentials_reproduce_plan():
    rng = np.random.default_rng(8)
    c = cost_matrix(rng.normal(size=(40, 3)), halton_grid(40, 3))
    plan = sinkhorn(c, 0.02)
    f, g = plan.row_potential, plan.col_potential
    np.testing.assert_allclose(np.exp((f[:, None] + g[None, :] - c) / 0.02), plan.weights,
                               rtol=1e-8, atol=1e-300)


def test_sinkhorn_warm_start():
    rng = np.random.default_rng(9)
    c = cost_matrix(rng.normal(size=(50, 2)), halton_grid(50, 2))
    cold = sinkhorn(c, 0.01)
    warm = sinkhorn(c, 0.01, init=cold.col_potential)
    assert warm.iterations_used <= 1
    np.testing.assert_allclose(warm.weights, cold.weights, atol=1e-10)


def test_sinkhorn_heavy_tailed_costs():
    # Cauchy samples produce costs spanning many orders of magnitude
    rng = np.random.default_rng(0)
    x = np.tan(np.pi * (rng.random((400, 3)) - 0.5))
    plan = sinkhorn(cost_matrix(x, halton_grid(400, 3)), 0.001)
    assert plan.violation <= 1e-9


def test_sinkhorn_errors():
    with pytest.raises(InvalidArgumentError):
        sinkhorn([[0, 1], [1, 0]], 0.0)
    with pytest.raises(InvalidArgumentError):
        sinkhorn([[0, 1], [1, 0]], -1.0)
    with pytest.raises(InvalidArgumentError):
        sinkhorn([[0, 1], [1, 0]], 1.0, method="bogus")
    rng = np.random.default_rng(2)
    c = cost_matrix(rng.normal(size=(100, 2)), halton_grid(100, 2))
    with pytest.raises(ConvergenceError) as info:
        sinkhorn(c, 0.001, max_iter=2, method="scaling")
    assert info.value.violation > 1e-9
    assert info.value.iterations == 2


@pytest.mark.parametrize("seed", range(10))
def test_small_epsilon_concentrates_on_assignment(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    c = rng.random((n, n))
    # a clearly unique optimum: near-ties keep mass on both optima at any fixed eps
    while assignment_gap(c) < 0.02:
        c = rng.random((n, n))
    _, perm = brute_force_assignment(c)
    eps = 1e-3 * np.median(c)
    p = sinkhorn(c, eps).weights
    assert np.all(p[np.arange(n), perm] >= 0.99 / n)


def test_transport_cost_nondecreasing_in_epsilon():
    rng = np.random.default_rng(4)
    c = cost_matrix(rng.normal(size=(30, 2)), halton_grid(30, 2))
    costs = [float((c * sinkhorn(c, e).weights).sum()) for e in (0.001, 0.01, 0.1, 1.0, 10.0)]
    assert all(a <= b + 1e-12 for a, b in zip(costs, costs[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.floats(0.01, 5.0), st.integers(0, 2**31))
def test_sinkhorn_marginals_property(n, eps, seed):
    c = np.random.default_rng(seed).random((n, n)) * 3
    plan = sinkhorn(c, eps)
    assert np.all(plan.weights >= 0)
    assert marginal_violation(plan.weights) <= 1e-9


def test_cost_vjp_matches_finite_differences():
    rng = np.random.default_rng(6)
    c = rng.random((6, 6))
    w = rng.normal(size=(6, 6))
    eps = 0.2

    def energy(cost):
        return float((w * sinkhorn(cost, eps, tol=1e-13).weights).sum())

    grad = transport_cost_vjp(sinkhorn(c, eps, tol=1e-13), w)
    h = 1e-6
    fd = np.zeros_like(c)
    for i in range(6):
        for j in range(6):
            e = np.zeros_like(c)
            e[i, j] = h
            fd[i, j] = (energy(c + e) - energy(c - e)) / (2 * h)
    np.testing.assert_allclose(grad, fd, atol=1e-6)
