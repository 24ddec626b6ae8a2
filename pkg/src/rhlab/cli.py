"""Command line: rhlab <subcommand> --config FILE [--seed N] [--out DIR].

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

from .assembly import parse_config, run_experiment
from .errors import ConfigError, NumericalFailure

SUBCOMMANDS = ("roots1d", "matrixstats", "fubini", "barrier", "curves2d",
               "packing", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhlab",
        description="Random real projective hypersurfaces at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="artifact output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if cfg["experiment"] != args.command:
            raise ConfigError(
                f"config declares experiment {cfg['experiment']!r} but the "
                f"subcommand is {args.command!r}"
            )
        manifest = run_experiment(args.config, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc} (partial = {exc.partial})", file=sys.stderr)
        return 3
    print(f"wrote {', '.join(manifest['artifacts'])} and manifest.json to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
