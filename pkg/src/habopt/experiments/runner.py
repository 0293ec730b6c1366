"""Scenario runner: computes, then writes CSV/JSON reports, figures and a manifest.

CSV files are byte-reproducible: floats are written with ``repr`` (shortest
round-trip form) and every row starts with ``kappa, m0, mu, dim, N, seed``.
Only ``manifest.json`` carries run-dependent data (wall time, versions).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from .. import __version__
from ..errors import ConfigError, HaboptError
from ..optimizer import multistart, optimize
from ..resource import (ResourceField, bang_bang_fraction, constant_field, make_crenel_1d,
                        make_random, monotone_concentration_defect)
from ..steady import solve_steady
from . import figures, studies
from .config import ScenarioConfig

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "habopt.manifest"
MANIFEST_VERSION = 1
ECHO_COLUMNS = ("kappa", "m0", "mu", "dim", "N", "seed")


@dataclass
class RunReport:
    out_dir: str
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class _Writer:
    def __init__(self, cfg: ScenarioConfig, out_dir: str):
        self.cfg = cfg
        self.out_dir = out_dir
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def csv(self, name, rows, mu_default=None):
        cfg = self.cfg
        echo = {
            "kappa": cfg.constraints.kappa,
            "m0": cfg.constraints.m0,
            "dim": cfg.grid.dim,
            "N": cfg.grid.cells_per_axis[0],
            "seed": cfg.seed,
        }
        extra = []
        for row in rows:
            for k in row:
                if k not in ECHO_COLUMNS and k not in extra:
                    extra.append(k)
        header = list(ECHO_COLUMNS) + extra
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                full = dict(echo, mu=row.get("mu", mu_default if mu_default is not None else ""))
                full.update({k: v for k, v in row.items() if k != "mu"})
                w.writerow([_fmt(full.get(k, "")) for k in header])

    def json(self, name, data):
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def figure(self, name):
        return self.path(name) if self.cfg.figures else None


def build_resource(cfg: ScenarioConfig) -> ResourceField:
    """Resource field described by ``cfg.resource``; bad descriptions are config errors."""
    spec = cfg.resource
    grid, c = cfg.grid, cfg.constraints
    try:
        if spec["kind"] == "constant":
            return constant_field(grid, c)
        if spec["kind"] == "crenel":
            return make_crenel_1d(grid, c, spec["intervals"])
        if spec["kind"] == "random":
            return make_random(grid, c, spec["seed"])
        with open(spec["path"]) as fh:
            m = ResourceField.from_dict(json.load(fh))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError("resource", str(exc)) from None
    if m.grid != grid or m.constraints != c:
        raise ConfigError("resource.path", "field grid or constraints differ from the config")
    return m


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> RunReport:
    """Run one scenario and write its report directory.

    Raises :class:`ConfigError` before anything is written when the
    resource description is invalid, and re-raises solver failures after
    writing a manifest with ``status: "failed"`` (artifacts produced so far
    are kept).
    """
    resource = build_resource(cfg) if cfg.scenario in ("solve", "optimize", "mu_sweep") else None
    os.makedirs(cfg.out_dir, exist_ok=True)
    out = _Writer(cfg, cfg.out_dir)
    t0 = time.perf_counter()
    status, error, summary = "ok", None, {}
    try:
        summary = _SCENARIOS[cfg.scenario](cfg, out, resource, threads)
    except HaboptError as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest = {
            "schema": MANIFEST_SCHEMA,
            "schema_version": MANIFEST_VERSION,
            "scenario": cfg.scenario,
            "status": status,
            "error": error,
            "config": cfg.to_dict(),
            "versions": {
                "habopt": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_time_s": time.perf_counter() - t0,
            "artifacts": sorted(out.artifacts),
            "summary": summary,
        }
        with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return RunReport(cfg.out_dir, list(out.artifacts), summary)


def _plot_fields(out, grid, name, m, theta, title):
    if grid.dim == 1:
        p = out.figure(f"{name}.svg")
        if p:
            figures.profile_1d(p, grid, {"m": m.values, "theta": theta.values}, title)
    elif grid.dim == 2:
        p = out.figure(f"{name}_m.svg")
        if p:
            figures.heatmap_svg(p, m.field, 0.0, m.constraints.kappa, f"m ({title})")
        p = out.figure(f"{name}_theta.svg")
        if p:
            figures.heatmap_svg(p, theta, title=f"theta ({title})")


def _solve(cfg, out, m, threads):
    sol = solve_steady(cfg.grid, m, cfg.mu, cfg.steady)
    out.json("resource.json", m.to_dict())
    out.json("solution.json", sol.to_dict())
    row = {"mu": cfg.mu, "F": sol.total_population,
           "F_minus_m0": sol.total_population - cfg.constraints.m0,
           "total_population": sol.total_population, "residual_norm": sol.residual_norm,
           "iterations": sol.iterations, "used_fallback": sol.used_fallback,
           "bang_bang": bang_bang_fraction(m)}
    out.csv("solve.csv", [row])
    _plot_fields(out, cfg.grid, "solution", m, sol.theta, f"mu={cfg.mu:g}")
    return {"total_population": sol.total_population, "residual_norm": sol.residual_norm}


def _optimize(cfg, out, m, threads):
    grid, c = cfg.grid, cfg.constraints
    if cfg.n_starts > 0:
        res = multistart(grid, c, cfg.mu, cfg.n_starts, cfg.optim, threads=threads)
        runs, best = res.runs, res.best
        out.json("runs.json", {"best_index": res.best_index,
                               "runs": [r.to_dict() for r in runs]})
    else:
        best = optimize(grid, c, cfg.mu, m, cfg.optim, label=cfg.resource["kind"])
        runs = [best]
        out.json("run.json", best.to_dict())
    hist = []
    for k, r in enumerate(runs):
        for i, f in enumerate(r.f_history):
            hist.append({"mu": cfg.mu, "run": k, "init": r.init_label, "iteration": i, "F": f})
    out.csv("history.csv", hist)
    rows = []
    for k, r in enumerate(runs):
        row = {"mu": cfg.mu, "run": k}
        row.update(studies.winner_metrics(grid, r))
        rows.append(row)
    out.csv("runs.csv", rows)
    _plot_fields(out, grid, "optimum", best.final_m, best.final_theta, f"mu={cfg.mu:g}")
    p = out.figure("history.svg")
    if p:
        figures.series(p, list(range(len(best.f_history))), {"F": best.f_history},
                       "iteration", "F")
    summary = studies.winner_metrics(grid, best)
    return summary


def _mu_sweep(cfg, out, m, threads):
    rows, sols = studies.mu_sweep(cfg.grid, m, cfg.mu_list, cfg.steady)
    out.csv("mu_sweep.csv", rows)
    p = out.figure("mu_sweep.svg")
    if p:
        figures.loglog(p, cfg.mu_list, [r["F_minus_m0"] for r in rows], "mu", "|F - m0|")
    return {"F": [r["F"] for r in rows]}


def _crenel_study(cfg, out, m, threads):
    rows, summary = studies.crenel_study_1d(cfg.grid, cfg.constraints, cfg.mu_list,
                                            cfg.split_fractions, cfg.steady)
    out.csv("crenel_scan.csv", rows)
    out.csv("crenel_argmax.csv", summary)
    p = out.figure("crenel_scan.svg")
    if p:
        figures.crenel_scan(p, summary, rows)
    return _fragmentation_summary(summary)


def _fragmentation_summary(summary):
    return {
        "witness_mu_double_beats_best_single":
            [r["mu"] for r in summary if r["double_beats_best_single"]],
        "witness_mu_double_beats_boundary_crenel":
            [r["mu"] for r in summary if r["double_beats_boundary_crenel"]],
        "argmax": [{"mu": r["mu"], "family": r["argmax_family"],
                    "parameter": r["argmax_parameter"]} for r in summary],
    }


def _fragmentation(cfg, out, m, threads):
    rows, summary = studies.crenel_study_1d(cfg.grid, cfg.constraints, cfg.mu_list,
                                            cfg.split_fractions, cfg.steady)
    out.csv("crenel_scan.csv", rows)
    out.csv("fragmentation.csv", summary)
    result = _fragmentation_summary(summary)
    if cfg.n_starts > 0:
        opt_rows = []
        for mu in cfg.mu_list:
            best = multistart(cfg.grid, cfg.constraints, mu, cfg.n_starts, cfg.optim,
                              threads=threads).best
            row = {"mu": mu}
            row.update(studies.winner_metrics(cfg.grid, best))
            opt_rows.append(row)
            _plot_fields(out, cfg.grid, f"optimum_mu{len(opt_rows) - 1}", best.final_m,
                         best.final_theta, f"mu={mu:g}")
        out.csv("fragmentation_optima.csv", opt_rows)
        result["optimizer_fragments"] = [r["winner_fragments"] for r in opt_rows]
    p = out.figure("fragmentation.svg")
    if p:
        figures.series(p, cfg.mu_list, {
            "double - best single": [r["double_minus_best_single"] for r in summary],
            "double - boundary crenel": [r["double_minus_boundary_crenel"] for r in summary],
        }, "mu", "F difference", logx=True)
    return result


def _mu_star(cfg, out, m, threads):
    rows, estimate, winners = studies.mu_star_estimate(
        cfg.grid, cfg.constraints, cfg.mu_list, cfg.n_starts, cfg.optim, threads)
    out.csv("mu_star.csv", rows)
    result = {
        "mu_hat": estimate,
        "criterion": "winner bang_bang_fraction >= 1 - 2/total_cells for every grid mu >= mu_hat",
        "note": ("mu_hat is the smallest grid value above which all multistart winners "
                 "are bang-bang; it is an upper-bound-style indicator on this grid and "
                 "start set, not the threshold mu* itself"),
    }
    out.json("mu_star.json", result)
    p = out.figure("mu_star.svg")
    if p:
        figures.series(p, cfg.mu_list, {"1 - bang_bang (winner)":
                                        [r["winner_non_bang"] for r in rows]},
                       "mu", "non-bang-bang fraction", logx=True)
    return result


def _concentration(cfg, out, m, threads):
    rows, winners = studies.concentration_2d(cfg.grid, cfg.constraints, cfg.mu_list,
                                             cfg.n_starts, cfg.optim, threads)
    out.csv("concentration.csv", rows)
    for i, (mu, w) in enumerate(zip(cfg.mu_list, winners)):
        _plot_fields(out, cfg.grid, f"winner_mu{i}", w.final_m, w.final_theta, f"mu={mu:g}")
    p = out.figure("concentration.svg")
    if p:
        figures.series(p, cfg.mu_list, {"defect": [r["winner_defect"] for r in rows]},
                       "mu", "monotone concentration defect", logx=True)
    defects = [monotone_concentration_defect(w.final_m) for w in winners]
    return {"defects": defects}


_SCENARIOS = {
    "solve": _solve,
    "optimize": _optimize,
    "mu_sweep": _mu_sweep,
    "crenel_study_1d": _crenel_study,
    "mu_star_estimate": _mu_star,
    "concentration_2d": _concentration,
    "fragmentation_small_mu": _fragmentation,
}
