"""Adjoint-state gradient of the total population with respect to resources.

Differentiating ``mu L theta + (m - theta) theta = 0`` in the direction ``dm``
gives ``(mu L + diag(m - 2 theta)) dtheta = -theta dm``. With ``p`` solving

    (mu L + diag(m - 2 theta)) p = -1

and ``L`` symmetric, ``<1, dtheta> = <p, theta dm>``, so the L2 gradient of the
population integral is the cell-wise product ``p theta``. The operator is the
Newton matrix at convergence; it is invertible at the stable positive state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HaboptError
from .grid import Grid, ScalarField, ShiftedOperator, _check, integrate, shifted_apply
from .resource import ResourceField
from .steady import SteadyOptions, SteadySolution, effective_tol, linearized_shift, solve_steady

ADJOINT_TOL = 1e-9


@dataclass(frozen=True)
class GradientBundle:
    p: ScalarField
    grad: ScalarField
    theta_ref: SteadySolution
    shift: np.ndarray  # diagonal of the operator that produced p

    def to_dict(self) -> dict:
        return {
            "p": self.p.to_dict(),
            "grad": self.grad.to_dict(),
            "diagnostics": self.theta_ref.diagnostics(),
        }


def adjoint_residual(grid: Grid, m: ResourceField, mu: float, sol: SteadySolution,
                     p: ScalarField) -> float:
    """Max-norm of ``(mu L + diag(m - 2 theta)) p + 1``."""
    r = shifted_apply(grid, mu, linearized_shift(m, sol.theta), p.values) + 1.0
    return float(np.max(np.abs(r)))


def solve_adjoint(grid: Grid, m: ResourceField, mu: float, sol: SteadySolution) -> GradientBundle:
    """Adjoint state ``p`` and gradient ``p * theta`` at a converged steady state."""
    _check(grid, m.field)
    _check(grid, sol.theta)
    shift = linearized_shift(m, sol.theta)
    p = ShiftedOperator(grid, mu, shift).solve(np.full(grid.total_cells, -1.0))
    theta = sol.theta.values
    return GradientBundle(
        p=ScalarField(grid, p),
        grad=ScalarField(grid, p * theta),
        theta_ref=sol,
        shift=shift,
    )


def gradient(grid: Grid, m: ResourceField, mu: float,
             opts: SteadyOptions | None = None) -> GradientBundle:
    return solve_adjoint(grid, m, mu, solve_steady(grid, m, mu, opts))


def fd_validate(grid: Grid, m: ResourceField, mu: float, direction: ScalarField,
                h: float = 1e-5) -> float:
    """Compare the adjoint directional derivative with central differences.

    Returns the relative error ``|adj - fd| / max(1e-14, |adj|)``. When the
    adjoint derivative is below 1e-8 in magnitude (a flat point) the
    absolute error is returned instead.
    """
    _check(grid, direction)
    d = direction.values
    if abs(integrate(grid, direction)) > 1e-12 * max(1.0, float(np.max(np.abs(d)))):
        raise ValueError("direction must have zero mean")
    kappa = m.constraints.kappa
    plus = m.values + h * d
    minus = m.values - h * d
    if min(plus.min(), minus.min()) < 0 or max(plus.max(), minus.max()) > kappa:
        raise ValueError("m +/- h*direction leaves [0, kappa]")

    tight = SteadyOptions(newton_tol=1e-13)
    base = solve_steady(grid, m, mu, tight)
    bundle = solve_adjoint(grid, m, mu, base)
    adj = grid.cell_volume * float(np.dot(bundle.grad.values, d))

    def population(values):
        field = ResourceField(ScalarField(grid, values), m.constraints)
        sol = solve_steady(grid, field, mu, tight, theta0=base.theta)
        if sol.residual_norm > effective_tol(grid, mu, 1e-13, sol.theta.values) * 10:
            raise HaboptError("inner steady solve did not converge tightly")
        return sol.total_population

    fd = (population(plus) - population(minus)) / (2.0 * h)
    if abs(adj) < 1e-8:
        return abs(adj - fd)
    return abs(adj - fd) / max(1e-14, abs(adj))
