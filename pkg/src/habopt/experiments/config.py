"""Scenario configuration: JSON document -> validated :class:`ScenarioConfig`.

Example::

    {
      "scenario": "mu_sweep",
      "grid": {"dim": 1, "cells": [256]},
      "constraints": {"kappa": 1.0, "m0": 0.4},
      "mu_list": [1, 10, 100, 1000],
      "resource": {"kind": "crenel", "intervals": [[0.0, 0.4]]},
      "seed": 0
    }

Validation runs completely before any solve or any file is written.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import ConfigError
from ..grid import Grid, build_grid
from ..optimizer import OptimOptions, Strategy
from ..resource import ConstraintSet
from ..steady import SteadyOptions

SCENARIOS = (
    "solve",
    "optimize",
    "mu_sweep",
    "crenel_study_1d",
    "mu_star_estimate",
    "concentration_2d",
    "fragmentation_small_mu",
)

RESOURCE_KINDS = ("constant", "crenel", "random", "file")

_DEFAULT_MU = {
    "mu_sweep": [1.0, 10.0, 100.0, 1000.0],
    "crenel_study_1d": [float(x) for x in np.logspace(-3, 1, 9)],
    "mu_star_estimate": [float(x) for x in np.logspace(-3, 1, 9)],
    "concentration_2d": [0.001, 0.01, 0.1, 1.0, 10.0],
    "fragmentation_small_mu": [float(x) for x in np.logspace(-3, -1, 5)],
}

_DEFAULT_CELLS = {1: 256, 2: 64}

_TOP_KEYS = {"scenario", "grid", "constraints", "mu", "mu_list", "resource", "steady",
             "optim", "n_starts", "seed", "out_dir", "figures", "split_fractions"}


@dataclass
class ScenarioConfig:
    scenario: str
    grid: Grid
    constraints: ConstraintSet
    mu: float | None = None
    mu_list: list = field(default_factory=list)
    resource: dict = field(default_factory=lambda: {"kind": "constant"})
    steady: SteadyOptions = field(default_factory=SteadyOptions)
    optim: OptimOptions = field(default_factory=OptimOptions)
    n_starts: int = 0
    seed: int = 0
    out_dir: str = "habopt-out"
    figures: bool = True
    split_fractions: list = field(default_factory=lambda: [i / 10 for i in range(1, 10)])

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "grid": {"dim": self.grid.dim, "cells": list(self.grid.cells_per_axis)},
            "constraints": self.constraints.to_dict(),
            "mu": self.mu,
            "mu_list": list(self.mu_list),
            "resource": self.resource,
            "steady": {f.name: getattr(self.steady, f.name) for f in fields(self.steady)},
            "optim": {
                "strategy": self.optim.strategy.value,
                "step0": self.optim.step0,
                "max_iters": self.optim.max_iters,
                "f_rel_tol": self.optim.f_rel_tol,
                "stall_window": self.optim.stall_window,
                "seed": self.optim.seed,
            },
            "n_starts": self.n_starts,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "figures": self.figures,
            "split_fractions": list(self.split_fractions),
        }


def _positive_float(value, name):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if not math.isfinite(x) or x <= 0:
        raise ConfigError(name, f"must be a positive finite number, got {value!r}")
    return x


def _int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value}")
    return value


def _options(cls, data, name, extra=()):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(name, "expected an object")
    allowed = {f.name for f in fields(cls)} - set(extra)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown option")
    return dict(data)


def parse_config(data: dict, scenario: str | None = None, seed: int | None = None,
                 out_dir: str | None = None) -> ScenarioConfig:
    """Validate a config document; CLI arguments override the document."""
    if not isinstance(data, dict):
        raise ConfigError("config", "expected a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")

    name = scenario or data.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError("scenario", f"expected one of {', '.join(SCENARIOS)}, got {name!r}")
    if scenario and data.get("scenario") not in (None, scenario):
        raise ConfigError("scenario", f"config says {data['scenario']!r}, CLI says {scenario!r}")

    g = data.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("grid", "expected an object")
    default_dim = 2 if name == "concentration_2d" else 1
    dim = _int(g.get("dim", default_dim), "grid.dim", 1)
    cells = g.get("cells", [_DEFAULT_CELLS.get(dim, 32)] * dim)
    if isinstance(cells, int):
        cells = [cells] * dim
    if not isinstance(cells, list) or len(cells) != dim:
        raise ConfigError("grid.cells", f"expected a list of {dim} integers")
    for i, n in enumerate(cells):
        _int(n, f"grid.cells[{i}]", 2)
    grid = build_grid(dim, cells)
    if name in ("crenel_study_1d", "fragmentation_small_mu") and dim != 1:
        raise ConfigError("grid.dim", f"{name} needs a 1D grid")
    if name == "concentration_2d" and dim != 2:
        raise ConfigError("grid.dim", "concentration_2d needs a 2D grid")
    if dim > 2:
        raise ConfigError("grid.dim", "experiments cover dim 1 and 2 only")

    cons = data.get("constraints", {})
    if not isinstance(cons, dict):
        raise ConfigError("constraints", "expected an object")
    kappa = _positive_float(cons.get("kappa", 1.0), "constraints.kappa")
    m0 = _positive_float(cons.get("m0", 0.4 * kappa), "constraints.m0")
    if not m0 < kappa:
        raise ConfigError("constraints.m0", f"must be < kappa={kappa}, got {m0}")
    constraints = ConstraintSet(kappa, m0)

    mu = data.get("mu")
    if mu is not None:
        mu = _positive_float(mu, "mu")
    mu_list = data.get("mu_list")
    if mu_list is None:
        mu_list = _DEFAULT_MU.get(name, [])
    if not isinstance(mu_list, list):
        raise ConfigError("mu_list", "expected a list of numbers")
    mu_list = [_positive_float(x, f"mu_list[{i}]") for i, x in enumerate(mu_list)]
    if name in _DEFAULT_MU and not mu_list:
        raise ConfigError("mu_list", "must not be empty")
    if name in ("mu_star_estimate", "concentration_2d", "mu_sweep") and \
            any(b <= a for a, b in zip(mu_list, mu_list[1:])):
        raise ConfigError("mu_list", "must be strictly increasing")
    if name in ("solve", "optimize") and mu is None:
        mu = 1.0

    resource = data.get("resource", {"kind": "crenel" if name == "mu_sweep" and dim == 1
                                     else "constant"})
    resource = _check_resource(resource, grid, constraints)

    steady = SteadyOptions(**_options(SteadyOptions, data.get("steady"), "steady"))
    optim_raw = _options(OptimOptions, data.get("optim"), "optim", extra=("steady",))
    if "strategy" in optim_raw and optim_raw["strategy"] not in [s.value for s in Strategy]:
        raise ConfigError("optim.strategy", f"unknown strategy {optim_raw['strategy']!r}")
    if name == "mu_star_estimate":
        optim_raw.setdefault("strategy", Strategy.projected_gradient.value)

    run_seed = data.get("seed", 0) if seed is None else seed
    run_seed = _int(run_seed, "seed", 0)
    optim_raw.setdefault("seed", run_seed)
    try:
        optim = OptimOptions(steady=steady, **optim_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("optim", str(exc)) from None

    default_starts = {"mu_star_estimate": 10, "concentration_2d": 4}.get(name, 0)
    n_starts = _int(data.get("n_starts", default_starts), "n_starts", 0)
    if name in ("mu_star_estimate", "concentration_2d") and n_starts < 1:
        raise ConfigError("n_starts", f"{name} needs at least one start")

    splits = data.get("split_fractions", [i / 10 for i in range(1, 10)])
    if not isinstance(splits, list) or not splits:
        raise ConfigError("split_fractions", "expected a non-empty list")
    for i, s in enumerate(splits):
        if not isinstance(s, (int, float)) or not 0 < s < 1:
            raise ConfigError(f"split_fractions[{i}]", "must lie in (0, 1)")

    figures = data.get("figures", True)
    if not isinstance(figures, bool):
        raise ConfigError("figures", "expected true or false")

    return ScenarioConfig(
        scenario=name,
        grid=grid,
        constraints=constraints,
        mu=mu,
        mu_list=mu_list,
        resource=resource,
        steady=steady,
        optim=optim,
        n_starts=n_starts,
        seed=run_seed,
        out_dir=out_dir or data.get("out_dir", "habopt-out"),
        figures=figures,
        split_fractions=[float(s) for s in splits],
    )


def _check_resource(res, grid, constraints):
    if not isinstance(res, dict):
        raise ConfigError("resource", "expected an object")
    kind = res.get("kind", "constant")
    if kind not in RESOURCE_KINDS:
        raise ConfigError("resource.kind", f"expected one of {RESOURCE_KINDS}, got {kind!r}")
    out = dict(res, kind=kind)
    if kind == "crenel":
        if grid.dim != 1:
            raise ConfigError("resource.kind", "crenels need a 1D grid")
        ivs = res.get("intervals", [[0.0, constraints.m0 / constraints.kappa]])
        if not isinstance(ivs, list) or not ivs:
            raise ConfigError("resource.intervals", "expected a list of [a, b] pairs")
        for i, iv in enumerate(ivs):
            if not (isinstance(iv, list) and len(iv) == 2
                    and all(isinstance(x, (int, float)) for x in iv)
                    and 0 <= iv[0] < iv[1] <= 1):
                raise ConfigError(f"resource.intervals[{i}]", "expected [a, b] with 0 <= a < b <= 1")
        out["intervals"] = [[float(a), float(b)] for a, b in ivs]
    elif kind == "random":
        out["seed"] = _int(res.get("seed", 0), "resource.seed", 0)
    elif kind == "file":
        if not isinstance(res.get("path"), str):
            raise ConfigError("resource.path", "expected a path to a ResourceField JSON file")
    return out


def load_config(path, **overrides) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return parse_config(data, **overrides)
