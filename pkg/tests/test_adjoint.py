import numpy as np
import pytest

from habopt.adjoint import adjoint_residual, fd_validate, gradient, solve_adjoint
from habopt.grid import ScalarField, build_grid, residual_floor
from habopt.resource import ConstraintSet, ResourceField, constant_field, left_crenel, make_random
from habopt.steady import linearized_shift, solve_steady


def zero_mean_direction(grid, seed, m=None, margin=None):
    """Random zero-mean direction, scaled to keep m +/- 1e-5 d admissible."""
    d = np.random.default_rng(seed).normal(size=grid.total_cells)
    if m is not None:
        # only move cells strictly inside the box
        inside = (m.values > 1e-3) & (m.values < m.constraints.kappa - 1e-3)
        d = np.where(inside, d, 0.0)
        d[inside] -= d[inside].mean()
    else:
        d -= d.mean()
    return ScalarField(grid, d / np.max(np.abs(d)))


def relaxed_crenel(grid, c, w=0.98):
    v = w * left_crenel(grid, c).values + (1 - w) * c.m0
    return ResourceField(ScalarField(grid, v), c)


def test_constant_case(g64, c04):
    b = gradient(g64, constant_field(g64, c04), 2.0)
    np.testing.assert_allclose(b.p.values, 1 / 0.4, rtol=1e-10)
    np.testing.assert_allclose(b.grad.values, 1.0, rtol=1e-10)


@pytest.mark.parametrize("mu", [0.01, 1.0, 100.0])
def test_adjoint_residual(g128, c04, mu):
    m = make_random(g128, c04, 3)
    sol = solve_steady(g128, m, mu)
    b = solve_adjoint(g128, m, mu, sol)
    floor = residual_floor(g128, mu, float(b.p.values.max()))
    assert adjoint_residual(g128, m, mu, sol, b.p) <= max(1e-9, floor)
    assert b.p.values.min() > 0
    np.testing.assert_array_equal(b.shift, linearized_shift(m, sol.theta))


@pytest.mark.parametrize("seed", range(4))
def test_fd_random_interior(g128, c04, seed):
    m = make_random(g128, c04, 100 + seed)
    d = zero_mean_direction(g128, seed, m)
    assert fd_validate(g128, m, 1.0, d) <= 1e-5


@pytest.mark.parametrize("mu", [0.05, 1.0, 10.0])
def test_fd_relaxed_crenel(g128, c04, mu):
    m = relaxed_crenel(g128, c04)
    d = zero_mean_direction(g128, 9)
    assert fd_validate(g128, m, mu, d) <= 1e-5


def test_fd_2d(c04):
    g = build_grid(2, [12, 12])
    m = make_random(g, c04, 1)
    assert fd_validate(g, m, 0.2, zero_mean_direction(g, 2, m)) <= 1e-5


def test_fd_step_sweep(g128, c04):
    m = make_random(g128, c04, 7)
    d = zero_mean_direction(g128, 7, m)
    errs = [fd_validate(g128, m, 1.0, d, h=h) for h in (1e-3, 1e-4, 1e-5)]
    assert errs[1] < errs[0]
    assert max(errs[1:]) <= 1e-5


def test_fd_rejects_bad_direction(g64, c04):
    m = make_random(g64, c04, 0)
    with pytest.raises(ValueError):
        fd_validate(g64, m, 1.0, g64.constant(1.0))
    d = np.zeros(64)
    d[0], d[1] = 1.0, -1.0
    with pytest.raises(ValueError):
        fd_validate(g64, left_crenel(g64, c04), 1.0, ScalarField(g64, d))


def test_gradient_reflection(g128, c04):
    m = make_random(g128, c04, 12)
    a = gradient(g128, m, 0.5).grad.values
    b = gradient(g128, m.reflected(), 0.5).grad.values
    np.testing.assert_allclose(b, a[::-1], rtol=1e-9)


def test_gradient_prefers_resource_region(g128, c04):
    """At a crenel the gradient is larger inside the crenel than far outside it."""
    g = gradient(g128, left_crenel(g128, c04), 1.0).grad.values
    assert g[:10].min() > g[-10:].max()


def test_bundle_to_dict(g64, c04):
    d = gradient(g64, left_crenel(g64, c04), 1.0).to_dict()
    assert {"p", "grad", "diagnostics"} <= set(d)
