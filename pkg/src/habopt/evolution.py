"""Time stepping for the logistic-diffusive evolution equation.

Diffusion is implicit and the logistic reaction explicit::

    (I - dt mu L) u_{n+1} = u_n + dt u_n (m - u_n)

The linear step is the shifted operator ``mu L - I/dt`` applied to ``u_{n+1}``
with right-hand side ``-(u_n + dt u_n (m - u_n)) / dt``; it is factorized once
per run. With ``dt <= 1 / (2 kappa)`` the reaction map is monotone on
``[0, kappa]``, hence the scheme preserves positivity and ordering of data.

This solver never looks at the steady residual, so it serves as an
independent check of :mod:`habopt.steady`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PositivityError, TimeStepError
from .grid import Grid, ScalarField, ShiftedOperator, _check
from .resource import ResourceField


@dataclass(frozen=True)
class EvolutionOptions:
    dt: float | None = None          # default 0.25 / kappa
    stop_tol: float = 1e-11          # on max|u_{n+1} - u_n| / dt
    max_steps: int = 500_000
    dump_path: str | None = None     # JSON lines trajectory, optional
    dump_every: int = 100

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


class EvolutionResult(NamedTuple):
    u: ScalarField
    steps: int
    stationary: bool
    rate: float


def evolve(grid: Grid, m: ResourceField, mu: float, u0: ScalarField,
           opts: EvolutionOptions | None = None, t_final: float | None = None) -> EvolutionResult:
    """Integrate from ``u0`` until the update rate drops below ``stop_tol``.

    ``t_final`` optionally caps the horizon (used by the steady solver's
    fallback); otherwise ``opts.max_steps`` does.
    """
    opts = opts or EvolutionOptions()
    _check(grid, m.field)
    _check(grid, u0)
    kappa = m.constraints.kappa
    dt = opts.dt if opts.dt is not None else 0.25 / kappa
    if dt > 0.5 / kappa:
        raise TimeStepError(f"dt={dt} exceeds the reaction bound 0.5/kappa={0.5 / kappa}")
    u = np.array(u0.values)
    if np.any(u < 0) or not np.any(u > 0):
        raise ValueError("initial data must be nonnegative and not identically zero")

    max_steps = opts.max_steps
    if t_final is not None:
        max_steps = min(max_steps, max(1, int(np.ceil(t_final / dt))))
    mv = m.values
    op = ShiftedOperator(grid, mu, np.full(grid.total_cells, -1.0 / dt))
    dump = open(opts.dump_path, "w") if opts.dump_path else None
    rate = np.inf
    step = 0
    try:
        for step in range(1, max_steps + 1):
            rhs = u + dt * u * (mv - u)
            new = op.solve(-rhs / dt)
            if np.any(new <= 0):
                raise PositivityError(f"non-positive density at step {step}; dt too large?")
            rate = float(np.max(np.abs(new - u))) / dt
            u = new
            if dump is not None and step % opts.dump_every == 0:
                record = ScalarField(grid, u).to_dict()
                record["step"] = step
                record["t"] = step * dt
                dump.write(json.dumps(record) + "\n")
            if rate < opts.stop_tol:
                return EvolutionResult(ScalarField(grid, u), step, True, rate)
    finally:
        if dump is not None:
            dump.close()
    return EvolutionResult(ScalarField(grid, u), step, False, rate)
