"""Parameter studies behind the scenarios. Each returns plain row dicts."""

from __future__ import annotations

import logging

import numpy as np

from ..optimizer import multistart
from ..resource import (bang_bang_fraction, distance_to_boundary_crenel, fragment_count_1d,
                        l1_distance, make_crenel_1d, monotone_concentration_defect)
from ..steady import solve_steady

log = logging.getLogger(__name__)

# Margin by which a double crenel must beat a single one to count as a witness.
WITNESS_MARGIN = 1e-8


def crenel_offsets(grid, c):
    """Left ends of single crenels: grid multiples below ``1 - m0/kappa``, then the right-touching one."""
    length = c.m0 / c.kappa
    h = grid.spacing[0]
    last = 1.0 - length
    n = int(np.floor(last / h + 1e-9))
    offs = [j * h for j in range(n + 1) if j * h < last - 1e-12]
    offs.append(last)
    return offs


def double_crenel_intervals(c, split):
    """Two boundary crenels, the left one holding ``split`` of the mass."""
    length = c.m0 / c.kappa
    return [(0.0, split * length), (1.0 - (1.0 - split) * length, 1.0)]


def crenel_study_1d(grid, c, mu_list, splits, steady_opts=None):
    """Population of single crenels at every offset and of double boundary crenels.

    Returns ``(rows, summary)``: one row per (mu, family, parameter) and one
    summary row per mu with the argmax of each family and the comparisons
    double-vs-best-single and double-vs-boundary-single.
    """
    length = c.m0 / c.kappa
    offsets = crenel_offsets(grid, c)
    rows, summary = [], []
    for mu in mu_list:
        theta = None
        singles = []
        for a in offsets:
            m = make_crenel_1d(grid, c, [(a, min(a + length, 1.0))])
            sol = solve_steady(grid, m, mu, steady_opts, theta0=theta)
            theta = sol.theta
            singles.append((a, sol.total_population))
            rows.append({"mu": mu, "family": "single", "parameter": a,
                         "F": sol.total_population})
        doubles = []
        for s in splits:
            m = make_crenel_1d(grid, c, double_crenel_intervals(c, s))
            sol = solve_steady(grid, m, mu, steady_opts)
            doubles.append((s, sol.total_population))
            rows.append({"mu": mu, "family": "double", "parameter": s,
                         "F": sol.total_population})
        a_best, f_single = max(singles, key=lambda t: t[1])
        s_best, f_double = max(doubles, key=lambda t: t[1])
        f_boundary = max(singles[0][1], singles[-1][1])
        family, param, f_best = (("double", s_best, f_double) if f_double > f_single
                                 else ("single", a_best, f_single))
        summary.append({
            "mu": mu,
            "best_single_offset": a_best,
            "best_single_F": f_single,
            "left_crenel_F": singles[0][1],
            "right_crenel_F": singles[-1][1],
            "boundary_crenel_F": f_boundary,
            "best_double_split": s_best,
            "best_double_F": f_double,
            "double_minus_best_single": f_double - f_single,
            "double_minus_boundary_crenel": f_double - f_boundary,
            "double_beats_best_single": int(f_double - f_single > WITNESS_MARGIN),
            "double_beats_boundary_crenel": int(f_double - f_boundary > WITNESS_MARGIN),
            "argmax_family": family,
            "argmax_parameter": param,
            "argmax_F": f_best,
        })
        log.info("crenel study mu=%g: best single a=%.4f F=%.10f, best double s=%.2f F=%.10f",
                 mu, a_best, f_single, s_best, f_double)
    return rows, summary


def winner_metrics(grid, run):
    m = run.final_m
    out = {
        "winner_init": run.init_label,
        "winner_F": run.final_f,
        "winner_bang_bang": run.bang_bang,
        "winner_non_bang": 1.0 - run.bang_bang,
        "winner_iterations": run.iterations,
        "winner_termination": run.termination.value,
        "winner_defect": monotone_concentration_defect(m),
    }
    if grid.dim == 1:
        out["winner_fragments"] = fragment_count_1d(m)
        out["winner_dist_boundary_crenel"] = distance_to_boundary_crenel(m)
    return out


def mu_star_estimate(grid, c, mu_list, n_starts, opts, threads=1):
    """Multistart per mu and the smallest grid mu above which every winner is bang-bang.

    Returns ``(rows, estimate, winners)``; ``estimate`` is None when the
    largest mu already fails.
    """
    rows, winners = [], []
    required = 1.0 - 2.0 / grid.total_cells
    for mu in mu_list:
        res = multistart(grid, c, mu, n_starts, opts, threads=threads)
        best = res.best
        winners.append(best)
        row = {"mu": mu, "n_runs": len(res.runs)}
        row.update(winner_metrics(grid, best))
        row["max_non_bang_over_starts"] = max(1.0 - r.bang_bang for r in res.runs)
        row["winner_is_bang_bang"] = int(best.bang_bang >= required)
        rows.append(row)
    estimate = None
    for i in range(len(rows) - 1, -1, -1):
        if not rows[i]["winner_is_bang_bang"]:
            break
        estimate = rows[i]["mu"]
    return rows, estimate, winners


def concentration_2d(grid, c, mu_list, n_starts, opts, threads=1):
    """Multistart winners over a mu grid with their monotonicity defect."""
    rows, winners = [], []
    prev = None
    for mu in mu_list:
        best = multistart(grid, c, mu, n_starts, opts, threads=threads).best
        row = {"mu": mu}
        row.update(winner_metrics(grid, best))
        row["l1_to_previous"] = "" if prev is None else l1_distance(best.final_m, prev)
        rows.append(row)
        winners.append(best)
        prev = best.final_m
    return rows, winners


def mu_sweep(grid, m, mu_list, steady_opts=None):
    rows, sols = [], []
    for mu in mu_list:
        sol = solve_steady(grid, m, mu, steady_opts)
        sols.append(sol)
        rows.append({
            "mu": mu,
            "F": sol.total_population,
            "F_minus_m0": sol.total_population - m.constraints.m0,
            "iterations": sol.iterations,
            "residual_norm": sol.residual_norm,
            "bang_bang": bang_bang_fraction(m),
        })
    return rows, sols
