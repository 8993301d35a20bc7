"""Command line entry point: ``levyou <scenario> --config FILE [--out DIR]``.

Exit status: 0 when every criterion passes, 1 when any criterion fails,
2 for configuration errors and refused inputs.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError, LevyOUError
from .config import SCENARIOS, load_config
from .validate import run_experiment, with_seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyou", description="Levy-driven OU experiments")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", default=None, help="output directory (default: the config's 'output')")
        p.add_argument("--seed", type=int, default=None, help="override sim.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed", "must be nonnegative")
        cfg = with_seed(load_config(args.config, args.scenario), args.seed)
        report = run_experiment(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LevyOUError as exc:
        print(f"refused: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.to_text([f"scenario: {cfg.scenario}", f"config digest: {cfg.digest()}", f"seed: {cfg.sim.seed}"]))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
