import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from habopt.errors import ConvergenceError
from habopt.grid import ScalarField, build_grid
from habopt.resource import (ConstraintSet, ResourceField, constant_field, left_crenel,
                             make_crenel_1d, make_random)
from habopt.steady import (SteadyOptions, linearized_shift, residual_norm, solve_steady,
                           total_population)


def dirichlet_form(grid, theta):
    """mu-free discrete identity: F - m0 = mu * vol * sum_edges (dtheta)^2 / (theta_i theta_j h^2)."""
    t = theta.reshaped()
    total = 0.0
    for axis, h in enumerate(grid.spacing):
        a = np.take(t, range(t.shape[axis] - 1), axis=axis)
        b = np.take(t, range(1, t.shape[axis]), axis=axis)
        total += np.sum((b - a) ** 2 / (a * b)) / h ** 2
    return grid.cell_volume * total


def smooth_field(grid, c, amp=0.3):
    g = grid.sample(lambda *xs: c.m0 + amp * np.prod([np.cos(np.pi * x) for x in xs], axis=0))
    return ResourceField(g, c)


def test_options_validate():
    for kw in ({"newton_tol": 0}, {"max_newton_iters": 0}, {"damping_min": 0}):
        with pytest.raises(ValueError):
            SteadyOptions(**kw)


def test_rejects_nonpositive_mu(g64, c04):
    with pytest.raises(ValueError):
        solve_steady(g64, constant_field(g64, c04), 0.0)


def test_constant_resource(g64, c04):
    sol = solve_steady(g64, constant_field(g64, c04), 1.0)
    np.testing.assert_allclose(sol.theta.values, 0.4, atol=1e-14)
    assert sol.iterations == 0
    assert sol.total_population == pytest.approx(0.4, abs=1e-14)


def test_constant_resource_2d(c04):
    g = build_grid(2, [8, 12])
    sol = solve_steady(g, constant_field(g, c04), 0.3)
    np.testing.assert_allclose(sol.theta.values, 0.4, atol=1e-14)


@pytest.mark.parametrize("mu", [0.05, 1.0, 20.0])
@pytest.mark.parametrize("kind", ["crenel", "random", "smooth"])
def test_population_identity(g128, c04, mu, kind):
    m = {"crenel": lambda: left_crenel(g128, c04),
         "random": lambda: make_random(g128, c04, 5),
         "smooth": lambda: smooth_field(g128, c04)}[kind]()
    sol = solve_steady(g128, m, mu)
    lhs = sol.total_population - 0.4
    rhs = mu * dirichlet_form(g128, sol.theta)
    assert lhs == pytest.approx(rhs, rel=1e-7, abs=1e-12)
    assert lhs > 0


def test_population_identity_2d(c04):
    g = build_grid(2, [16, 16])
    m = make_random(g, c04, 2)
    sol = solve_steady(g, m, 0.1)
    assert sol.total_population - 0.4 == pytest.approx(0.1 * dirichlet_form(g, sol.theta),
                                                        rel=1e-7)


@pytest.mark.parametrize("mu", [0.01, 1.0, 100.0])
def test_bounds(g128, c04, mu):
    m = make_random(g128, c04, 11)
    th = solve_steady(g128, m, mu).theta.values
    assert th.min() > 0
    assert th.max() <= m.values.max() + 1e-10


@pytest.mark.parametrize("mu", [0.01, 1.0])
def test_residual_small(g256, c04, mu):
    m = left_crenel(g256, c04)
    sol = solve_steady(g256, m, mu)
    assert sol.residual_norm <= 1e-10
    assert residual_norm(g256, m, mu, sol.theta) == pytest.approx(sol.residual_norm)
    assert sol.residual_history[-1] == sol.residual_norm


def test_residual_norm_example():
    g = build_grid(1, [4])
    c = ConstraintSet(1.0, 0.5)
    m = ResourceField(g.field([1.0, 1.0, 0.0, 0.0]), c)
    theta = g.field([1.0, 1.0, 1.0, 1.0])
    # L theta = 0, reaction (m - 1) * 1 = [0, 0, -1, -1]
    assert residual_norm(g, m, 2.0, theta) == 1.0
    theta = g.field([1.0, 0.5, 0.5, 0.5])
    # cell 0: 2*(0.5-1)*16 + 0 = -16; cell 1: 2*(1-1+0.5)*16 + 0.5*0.5 = 16.25
    assert residual_norm(g, m, 2.0, theta) == pytest.approx(16.25)


def test_mesh_convergence_order(c04):
    fs = []
    for n in (32, 64, 128, 256):
        g = build_grid(1, [n])
        fs.append(solve_steady(g, smooth_field(g, c04), 0.5).total_population)
    d = np.abs(np.diff(fs))
    orders = np.log2(d[:-1] / d[1:])
    assert np.all(orders >= 1.9)


def test_reflection_equivariance(g128, c04):
    m = make_random(g128, c04, 8)
    a = solve_steady(g128, m, 0.2)
    b = solve_steady(g128, m.reflected(), 0.2)
    np.testing.assert_allclose(b.theta.values, a.theta.values[::-1], atol=1e-10)
    assert b.total_population == pytest.approx(a.total_population, abs=1e-12)


def test_reflection_2d(c04):
    g = build_grid(2, [10, 14])
    m = make_random(g, c04, 4)
    a = solve_steady(g, m, 0.1).theta.reshaped()
    for axis in (0, 1):
        b = solve_steady(g, m.reflected(axis), 0.1).theta.reshaped()
        np.testing.assert_allclose(b, np.flip(a, axis), atol=1e-10)


def test_large_mu_flattens(g256, c04):
    m = left_crenel(g256, c04)
    excess = [solve_steady(g256, m, mu).total_population - 0.4 for mu in (1, 10, 100, 1000)]
    assert all(a > b for a, b in zip(excess, excess[1:]))
    assert excess[-1] < 1e-3


def test_warm_start_gives_same_answer(g128, c04):
    m = make_random(g128, c04, 1)
    cold = solve_steady(g128, m, 0.3)
    warm = solve_steady(g128, m, 0.3, theta0=cold.theta.values * 1.01)
    np.testing.assert_allclose(warm.theta.values, cold.theta.values, atol=1e-10)
    bad = solve_steady(g128, m, 0.3, theta0=-np.ones(128))  # ignored
    np.testing.assert_allclose(bad.theta.values, cold.theta.values, atol=1e-10)


def test_small_mu_crenel_converges(g256, c04):
    sol = solve_steady(g256, left_crenel(g256, c04), 0.001)
    assert sol.residual_norm <= 1e-10
    assert sol.theta.values.min() > 0


def test_iteration_cap_raises(g128, c04):
    with pytest.raises(ConvergenceError) as exc:
        solve_steady(g128, make_random(g128, c04, 0), 0.01, SteadyOptions(max_newton_iters=1))
    assert exc.value.history


def test_total_population_helper(g64, c04):
    m = left_crenel(g64, c04)
    assert total_population(g64, m, 1.0) == solve_steady(g64, m, 1.0).total_population


def test_linearized_shift(g64, c04):
    m = constant_field(g64, c04)
    th = g64.constant(0.4)
    np.testing.assert_allclose(linearized_shift(m, th), -0.4)


def test_solution_serialization(g64, c04):
    sol = solve_steady(g64, left_crenel(g64, c04), 1.0)
    d = sol.to_dict()
    assert set(d["diagnostics"]) == {"mu", "residual_norm", "iterations",
                                     "total_population", "used_fallback"}
    np.testing.assert_array_equal(ScalarField.from_dict(d).values, sol.theta.values)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.02, 50.0))
def test_population_excess_property(seed, mu):
    g = build_grid(1, [48])
    c = ConstraintSet(1.0, 0.4)
    sol = solve_steady(g, make_random(g, c, seed), mu)
    assert sol.total_population >= 0.4 - 1e-12
    assert sol.theta.values.min() > 0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.6))
def test_crenel_excess_positive(a):
    g = build_grid(1, [64])
    c = ConstraintSet(1.0, 0.4)
    m = make_crenel_1d(g, c, [(a, a + 0.4)])
    assert solve_steady(g, m, 1.0).total_population > 0.4 + 1e-6
