"""Maximization of the total population over the bathtub set.

Two strategies share one acceptance rule, the population never decreases:

``projected_gradient``
    ``m <- P(m + alpha * grad)`` with backtracking on ``alpha``.
``thresholding``
    ``m <- threshold_to_volume(grad)``, the maximizer of the linearized
    objective over the set (a conditional-gradient step). Iterates are
    bang-bang by construction; when the step does not improve, one
    projected-gradient step is taken instead.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import solve_adjoint
from .grid import Grid, ScalarField
from .resource import (ConstraintSet, ResourceField, bang_bang_fraction, constant_field,
                       make_random, project_admissible)
from .steady import SteadyOptions, SteadySolution, solve_steady

log = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-8
ALPHA_CAP = 1e6  # larger steps only push further into saturation
NULL_STEP = 1e-10


class Strategy(str, enum.Enum):
    projected_gradient = "projected_gradient"
    thresholding = "thresholding"


class Termination(str, enum.Enum):
    converged = "converged"
    max_iters = "max_iters"
    stalled = "stalled"


@dataclass(frozen=True)
class OptimOptions:
    strategy: Strategy = Strategy.thresholding
    step0: float = 1.0
    max_iters: int = 500
    f_rel_tol: float = 1e-10
    stall_window: int = 10
    seed: int = 0
    steady: SteadyOptions = field(default_factory=SteadyOptions)

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")


@dataclass
class OptimRun:
    final_m: ResourceField
    f_history: list
    final_f: float
    bang_bang: float
    iterations: int
    termination: Termination
    final_theta: ScalarField | None = None
    init_label: str = ""

    def to_dict(self) -> dict:
        return {
            "f_history": [float(f) for f in self.f_history],
            "final_f": float(self.final_f),
            "iterations": self.iterations,
            "termination": self.termination.value,
            "metrics": {"bang_bang": self.bang_bang},
            "init": self.init_label,
            "final_m": self.final_m.to_dict(),
        }


def threshold_to_volume(g: ScalarField, c: ConstraintSet) -> ResourceField:
    """Put ``kappa`` on the cells with the largest ``g`` until the mean is ``m0``.

    ``floor(m0 * n / kappa)`` cells are full, the next ranked cell holds the
    remainder, the rest are empty. Ties go to the lower cell index.
    """
    v = np.asarray(g.values)
    n = v.size
    order = np.argsort(-v, kind="stable")
    mass = c.m0 * n / c.kappa
    k = min(int(np.floor(mass)), n)
    out = np.zeros(n)
    out[order[:k]] = c.kappa
    if k < n:
        out[order[k]] = c.kappa * (mass - k)
    return ResourceField(ScalarField(g.grid, out), c)


class _Evaluator:
    """Steady solves warm-started from the last accepted state."""

    def __init__(self, grid, mu, steady_opts):
        self.grid, self.mu, self.opts = grid, mu, steady_opts
        self.theta = None

    def __call__(self, m: ResourceField) -> SteadySolution:
        return solve_steady(self.grid, m, self.mu, self.opts, theta0=self.theta)


def optimize(grid: Grid, c: ConstraintSet, mu: float, init: ResourceField,
             opts: OptimOptions | None = None, label: str = "") -> OptimRun:
    """Ascent on the total population from an admissible ``init``."""
    opts = opts or OptimOptions()
    if init.constraints != c:
        raise ValueError("init was built for different constraints")
    if init.grid != grid:
        raise ValueError("init lives on a different grid")
    solve = _Evaluator(grid, mu, opts.steady)

    m = init
    sol = solve(m)
    solve.theta = sol.theta
    history = [sol.total_population]
    alpha = opts.step0
    termination = Termination.max_iters
    it = 0
    for it in range(1, opts.max_iters + 1):
        grad = solve_adjoint(grid, m, mu, sol).grad
        accepted = None
        if opts.strategy is Strategy.thresholding:
            cand = threshold_to_volume(grad, c)
            if not np.array_equal(cand.values, m.values):
                cand_sol = solve(cand)
                if cand_sol.total_population > sol.total_population:
                    accepted = (cand, cand_sol)
        if accepted is None:
            accepted, alpha, status = _projected_step(m, sol, grad, alpha, c, solve)
            if status is not None:
                termination = status
                break
        m, sol = accepted
        solve.theta = sol.theta
        history.append(sol.total_population)
        w = opts.stall_window
        if len(history) > w:
            old = history[-1 - w]
            if (history[-1] - old) <= opts.f_rel_tol * abs(old):
                termination = Termination.converged
                break
    return OptimRun(
        final_m=m,
        f_history=history,
        final_f=history[-1],
        bang_bang=bang_bang_fraction(m),
        iterations=len(history) - 1,
        termination=termination,
        final_theta=sol.theta,
        init_label=label,
    )


def _projected_step(m, sol, grad, alpha, c, solve):
    """Backtracking projected-gradient step.

    Returns ``(accepted, next_alpha, termination)``; ``termination`` is set
    when no step is taken: ``converged`` if the projection does not move
    ``m`` (a KKT point of the bathtub problem), ``stalled`` if the step
    fell below the floor.
    """
    mv, gv = m.values, grad.values
    first = True
    while alpha >= ALPHA_FLOOR:
        cand = project_admissible(ScalarField(m.grid, mv + alpha * gv), c)
        if first and float(np.max(np.abs(cand.values - mv))) <= NULL_STEP * c.kappa:
            return None, alpha, Termination.converged
        first = False
        cand_sol = solve(cand)
        if cand_sol.total_population > sol.total_population:
            return (cand, cand_sol), min(2.0 * alpha, ALPHA_CAP), None
        alpha *= 0.5
    return None, alpha, Termination.stalled


@dataclass
class MultistartResult:
    runs: list
    best_index: int

    @property
    def best(self) -> OptimRun:
        return self.runs[self.best_index]


def start_fields(grid: Grid, c: ConstraintSet, n_starts: int, seed: int):
    """The constant field followed by ``n_starts`` seeded random fields."""
    seeds = np.random.SeedSequence(seed).generate_state(n_starts)
    starts = [("constant", constant_field(grid, c))]
    for i, s in enumerate(seeds):
        starts.append((f"random[{i}]", make_random(grid, c, int(s))))
    return starts


def multistart(grid: Grid, c: ConstraintSet, mu: float, n_starts: int,
               opts: OptimOptions | None = None, threads: int = 1) -> MultistartResult:
    """Optimize from several starts; deterministic for a given ``opts.seed``.

    With ``n_starts == 1`` and no random start wanted, call :func:`optimize`
    on the constant field directly; here the constant field is always run
    in addition to the ``n_starts`` random ones.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    opts = opts or OptimOptions()
    starts = start_fields(grid, c, n_starts, opts.seed)

    def run(item):
        label, init = item
        return optimize(grid, c, mu, init, opts, label=label)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(run, starts))
    else:
        runs = [run(s) for s in starts]
    best = max(range(len(runs)), key=lambda i: (runs[i].final_f, -i))
    return MultistartResult(runs, best)


def with_strategy(opts: OptimOptions, strategy) -> OptimOptions:
    return replace(opts, strategy=Strategy(strategy))
