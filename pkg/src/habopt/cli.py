"""Command line entry point: ``habopt <scenario> --config <path> ...``.

Exit codes: 0 success, 2 invalid configuration (nothing written),
3 solver failure (partial artifacts and a failed manifest kept).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, HaboptError
from .experiments import SCENARIOS, load_config, run_scenario


def build_parser():
    p = argparse.ArgumentParser(prog="habopt", description=__doc__.splitlines()[0])
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", required=True, help="scenario JSON document")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="seed (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="parallel multistart runs")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        cfg = load_config(args.config, scenario=args.scenario, seed=args.seed, out_dir=args.out)
        report = run_scenario(cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"habopt: invalid config: {exc}", file=sys.stderr)
        return 2
    except HaboptError as exc:
        print(f"habopt: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"{cfg.scenario}: wrote {len(report.artifacts)} artifacts to {report.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
