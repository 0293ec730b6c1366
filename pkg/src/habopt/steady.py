"""Positive steady state of the logistic-diffusive equation and the total population.

The discrete problem is ``R(theta) = mu L theta + (m - theta) theta = 0`` with
the Neumann Laplacian ``L``. The zero field is always a root; the solver
starts from the positive constant ``m0`` and damps Newton steps so iterates
stay strictly positive, which keeps it away from that trivial state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PositivityError, SingularSystemError
from .grid import (Grid, ScalarField, ShiftedOperator, _check, _laplacian_array,
                   integrate, residual_floor)
from .resource import ResourceField

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SteadyOptions:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping_min: float = 1e-4

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if not 0 < self.damping_min <= 1:
            raise ValueError("damping_min must lie in (0, 1]")


@dataclass(frozen=True)
class SteadySolution:
    theta: ScalarField
    mu: float
    residual_norm: float
    iterations: int
    total_population: float
    residual_history: list = field(default_factory=list, compare=False, repr=False)
    used_fallback: bool = False

    def diagnostics(self) -> dict:
        return {
            "mu": self.mu,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "total_population": self.total_population,
            "used_fallback": self.used_fallback,
        }

    def to_dict(self) -> dict:
        data = self.theta.to_dict()
        data["diagnostics"] = self.diagnostics()
        return data


def _residual(grid, mv, mu, theta):
    return mu * _laplacian_array(grid, theta) + (mv - theta) * theta


def residual_norm(grid: Grid, m: ResourceField, mu: float, theta: ScalarField) -> float:
    """Max-norm of ``mu L theta + (m - theta) theta``."""
    _check(grid, m.field)
    _check(grid, theta)
    return float(np.max(np.abs(_residual(grid, m.values, mu, theta.values))))


def effective_tol(grid: Grid, mu: float, tol: float, theta) -> float:
    """``tol`` raised to the float64 resolution floor of ``mu L theta``."""
    return max(tol, residual_floor(grid, mu, float(np.max(np.abs(theta)))))


def solve_steady(grid: Grid, m: ResourceField, mu: float,
                 opts: SteadyOptions | None = None, theta0=None) -> SteadySolution:
    """Damped Newton iteration for the positive steady state.

    Parameters
    ----------
    grid, m, mu
        Discretization, admissible resource field and diffusion rate.
    opts
        Tolerances; defaults to :class:`SteadyOptions`.
    theta0
        Optional positive warm start (ScalarField or array). When Newton
        fails from it, the solve is retried from the constant ``m0``.

    Newton steps are halved until the residual decreases and the iterate
    stays positive. Hitting ``damping_min`` twice triggers one restart from
    the evolution equation's state at time ``50 / mu``.
    """
    opts = opts or SteadyOptions()
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    _check(grid, m.field)
    if theta0 is not None:
        start = np.array(theta0.values if isinstance(theta0, ScalarField) else theta0, dtype=float)
        if start.shape == (grid.total_cells,) and np.all(start > 0):
            try:
                return _newton(grid, m, mu, opts, start)
            except (ConvergenceError, PositivityError, SingularSystemError) as exc:
                log.debug("warm start failed (%s); restarting from m0", exc)
    return _newton(grid, m, mu, opts, np.full(grid.total_cells, m.constraints.m0))


def _newton(grid, m, mu, opts, theta, allow_fallback=True):
    mv = m.values
    r = _residual(grid, mv, mu, theta)
    res = float(np.max(np.abs(r)))
    history = [res]
    stalls = 0
    used_fallback = False
    for it in range(opts.max_newton_iters + 1):
        if res <= effective_tol(grid, mu, opts.newton_tol, theta):
            return SteadySolution(
                theta=ScalarField(grid, theta),
                mu=float(mu),
                residual_norm=res,
                iterations=it,
                total_population=grid.cell_volume * float(np.sum(theta)),
                residual_history=history,
                used_fallback=used_fallback,
            )
        if it == opts.max_newton_iters:
            break
        delta = ShiftedOperator(grid, mu, mv - 2.0 * theta).solve(-r)
        alpha = 1.0
        while True:
            trial = theta + alpha * delta
            if np.all(trial > 0):
                r_trial = _residual(grid, mv, mu, trial)
                res_trial = float(np.max(np.abs(r_trial)))
                if res_trial < res:
                    break
            alpha *= 0.5
            if alpha < opts.damping_min:
                alpha = None
                break
        if alpha is None:
            stalls += 1
            if stalls >= 2:
                if used_fallback or not allow_fallback:
                    if not np.all(theta + opts.damping_min * delta > 0):
                        raise PositivityError(
                            f"Newton lost positivity at damping_min (mu={mu:g})")
                    raise ConvergenceError(
                        f"Newton stalled at residual {res:.3e} (mu={mu:g})", history)
                theta = _evolution_restart(grid, m, mu, theta)
                used_fallback = True
                stalls = 0
                r = _residual(grid, mv, mu, theta)
                res = float(np.max(np.abs(r)))
                history.append(res)
                continue
            trial = theta + opts.damping_min * delta
            if not np.all(trial > 0):
                continue
            r_trial = _residual(grid, mv, mu, trial)
            res_trial = float(np.max(np.abs(r_trial)))
        theta, r, res = trial, r_trial, res_trial
        history.append(res)
    raise ConvergenceError(
        f"Newton did not converge in {opts.max_newton_iters} iterations "
        f"(residual {res:.3e}, mu={mu:g})", history)


def _evolution_restart(grid, m, mu, theta):
    from .evolution import evolve

    log.info("Newton stalled at mu=%g; restarting from the evolution state at T=%g",
             mu, 50.0 / mu)
    res = evolve(grid, m, mu, ScalarField(grid, theta), t_final=50.0 / mu)
    return np.array(res.u.values)


def total_population(grid: Grid, m: ResourceField, mu: float,
                     opts: SteadyOptions | None = None) -> float:
    """Integral of the steady density."""
    return solve_steady(grid, m, mu, opts).total_population


def linearized_shift(m: ResourceField, theta: ScalarField) -> np.ndarray:
    """Diagonal ``m - 2 theta`` of the linearized operator at ``theta``.

    Both the Newton matrix and the adjoint matrix are ``mu L + diag`` of this.
    """
    return m.values - 2.0 * theta.values
