import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from habopt.errors import GridMismatchError, SingularSystemError
from habopt.grid import (ScalarField, ShiftedOperator, build_grid, integrate,
                         laplacian_apply, laplacian_matrix, solve_shifted)


def test_build_grid_1d():
    g = build_grid(1, [4])
    assert g.spacing == (0.25,)
    assert g.cell_volume == 0.25
    assert g.total_cells == 4
    np.testing.assert_allclose(g.centers(0), [0.125, 0.375, 0.625, 0.875])


def test_build_grid_2d():
    g = build_grid(2, [8, 8])
    assert g.total_cells == 64
    assert g.cell_volume == pytest.approx(1 / 64, abs=1e-15)


@pytest.mark.parametrize("dim, cells", [(1, [1]), (0, []), (2, [4, 1]), (2, [4])])
def test_build_grid_rejects(dim, cells):
    with pytest.raises(ValueError):
        build_grid(dim, cells)


@pytest.mark.parametrize("cells", [[3], [7, 5], [3, 4, 5], [256]])
def test_grid_invariants(cells):
    g = build_grid(len(cells), cells)
    for h, n in zip(g.spacing, g.cells_per_axis):
        assert abs(h * n - 1.0) <= 1e-15
    assert abs(g.cell_volume * g.total_cells - 1.0) <= 1e-12


def test_field_is_immutable():
    g = build_grid(1, [4])
    f = g.field([1, 2, 3, 4])
    with pytest.raises(ValueError):
        f.values[0] = 5.0
    with pytest.raises(AttributeError):
        f.values = np.zeros(4)


def test_field_rejects_nonfinite_and_wrong_size():
    g = build_grid(1, [4])
    with pytest.raises(ValueError):
        g.field([0, np.nan, 0, 0])
    with pytest.raises(GridMismatchError):
        g.field([0, 1, 2])


def test_field_json_roundtrip():
    g = build_grid(2, [3, 4])
    f = g.field(np.arange(12) * 0.1)
    data = json.loads(f.to_json())
    assert data["order"] == "row-major-last-axis-fastest"
    assert data["cells"] == [3, 4]
    back = ScalarField.from_json(f.to_json())
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_row_major_last_axis_fastest():
    g = build_grid(2, [2, 3])
    f = g.sample(lambda x, y: 10 * x + y)
    # second value changes y only
    x0, y0 = g.centers(0)[0], g.centers(1)
    np.testing.assert_allclose(f.values[:3], 10 * x0 + y0)


def test_laplacian_constant_is_zero():
    g = build_grid(2, [5, 7])
    np.testing.assert_array_equal(laplacian_apply(g, g.constant(3.7)).values, 0.0)


def test_laplacian_hand_example():
    g = build_grid(1, [4])
    out = laplacian_apply(g, g.field([0, 1, 1, 0]))
    np.testing.assert_array_equal(out.values, [16, -16, -16, 16])


def test_laplacian_grid_mismatch():
    with pytest.raises(GridMismatchError):
        laplacian_apply(build_grid(1, [4]), build_grid(1, [5]).constant(1.0))


def test_laplacian_matches_assembled_matrix():
    g = build_grid(2, [6, 5])
    v = np.random.default_rng(0).standard_normal(g.total_cells)
    np.testing.assert_allclose(laplacian_matrix(g) @ v, laplacian_apply(g, g.field(v)).values,
                               rtol=1e-12, atol=1e-9)
    assert abs(laplacian_matrix(g) - laplacian_matrix(g).T).max() == 0


def _cos_error(n):
    g = build_grid(2, [n, n])
    f = g.sample(lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y))
    lap = laplacian_apply(g, f).values
    return np.max(np.abs(lap + 2 * np.pi ** 2 * f.values))


def test_laplacian_second_order_2d():
    errs = [_cos_error(n) for n in (16, 32, 64, 128)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_laplacian_second_order_1d():
    errs = []
    for n in (32, 64, 128):
        g = build_grid(1, [n])
        f = g.sample(lambda x: np.cos(2 * np.pi * x))
        errs.append(np.max(np.abs(laplacian_apply(g, f).values
                                  + 4 * np.pi ** 2 * f.values)))
    assert np.log2(errs[0] / errs[1]) >= 1.9
    assert np.log2(errs[1] / errs[2]) >= 1.9


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 24, elements=st.floats(-1e3, 1e3)))
def test_laplacian_conservation(v):
    g = build_grid(2, [4, 6])
    assert abs(integrate(g, laplacian_apply(g, g.field(v)))) <= 1e-10 * max(1.0, np.abs(v).max())


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 20, elements=st.floats(-10, 10)), st.integers(0, 1))
def test_laplacian_reflection_symmetry(v, axis):
    g = build_grid(2, [4, 5])
    f = g.field(v)
    refl = g.field(np.flip(f.reshaped(), axis=axis))
    lhs = laplacian_apply(g, refl).reshaped()
    rhs = np.flip(laplacian_apply(g, f).reshaped(), axis=axis)
    np.testing.assert_array_equal(lhs, rhs)


def test_integrate_examples():
    g = build_grid(1, [4])
    assert integrate(g, g.constant(2.5)) == 2.5
    assert integrate(g, g.field([0, 1, 1, 0])) == 0.5
    g = build_grid(1, [10])
    assert integrate(g, g.field([0.7] * 3 + [0] * 7)) == pytest.approx(0.7 * 3 / 10, abs=1e-15)


def test_solve_shifted_constant():
    g = build_grid(1, [32])
    x = solve_shifted(g, 2.0, g.constant(1.0), g.constant(1.0))
    np.testing.assert_allclose(x.values, 1.0, atol=1e-12)


def test_solve_shifted_singular():
    g = build_grid(1, [32])
    with pytest.raises(SingularSystemError):
        solve_shifted(g, 1.0, g.constant(0.0), g.constant(1.0))


def test_solve_shifted_rejects_bad_mu():
    g = build_grid(1, [8])
    with pytest.raises(ValueError):
        solve_shifted(g, 0.0, g.constant(1.0), g.constant(1.0))


@pytest.mark.parametrize("seed", range(5))
def test_solve_shifted_residual(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(1, [64])
    c = g.field(rng.uniform(0.1, 2.0, 64))  # negative definite after sign flip
    b = g.field(rng.standard_normal(64))
    mu = float(rng.uniform(0.01, 10))
    x = solve_shifted(g, mu, g.field(-c.values), b)
    res = mu * laplacian_apply(g, x).values - c.values * x.values - b.values
    assert np.max(np.abs(res)) <= 1e-10 * max(1.0, np.max(np.abs(b.values)))


def test_solve_shifted_2d_residual():
    rng = np.random.default_rng(7)
    g = build_grid(2, [16, 12])
    c = -rng.uniform(0.2, 1.0, g.total_cells)
    b = rng.standard_normal(g.total_cells)
    x = ShiftedOperator(g, 0.5, c).solve(b)
    res = 0.5 * laplacian_apply(g, g.field(x)).values + c * x - b
    assert np.max(np.abs(res)) <= 1e-10 * max(1.0, np.abs(b).max())
