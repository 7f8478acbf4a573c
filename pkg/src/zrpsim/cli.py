"""Command line: `zrp <experiment> --config file.ini [--seed N] [--out dir]`.

Exit codes: 0 when every check passes, 1 when an assertion fails, 2 on
configuration problems.
"""

from __future__ import annotations

import argparse
import sys

from .config import TAG_ALIASES, load_config
from .errors import ConfigError, ZrpError
from .experiments import RUNNERS, run_experiment

_EXPERIMENT_HELP = {
    "oracle": "exact stationary law of a small closed cycle vs the product form",
    "stationarity": "time averages of a stationary run vs the predicted occupancies",
    "domination": "plain vs truncated pair driven by shared events; order violations",
    "couple": "coupled truncated runs; probe sites shed their discrepancies",
    "walkers": "absorbed random walks; origin-hitting and exploration bounds",
    "escape": "supercritical start; bulk density sheds mass to the slowest sites",
    "recurrence": "stationary truncated run; a fast probe empties again and again",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zrp",
        description="Event-driven zero-range process simulator and checks")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for tag, help_text in _EXPERIMENT_HELP.items():
        aliases = [a for a, t in TAG_ALIASES.items() if t == tag]
        p = sub.add_parser(tag, help=help_text, aliases=aliases)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the [experiment] master seed")
        p.add_argument("--out", default=None,
                       help="output directory (default: out_<experiment>)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tag = TAG_ALIASES.get(args.experiment, args.experiment)
    if tag not in RUNNERS:
        print(f"unknown experiment {tag}", file=sys.stderr)
        return 2
    outdir = args.out if args.out is not None else f"out_{tag}"
    try:
        cfg = load_config(args.config, tag, seed_override=args.seed)
        report = run_experiment(cfg, outdir)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ZrpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.one_line() + f"  out={outdir}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
