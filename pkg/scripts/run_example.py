#!/usr/bin/env python3
"""Run one of the bundled example configs.

    python scripts/run_example.py barrier_circle [--out OUT] [--seed N]

Equivalent to `rhlab <experiment> --config configs/<name>.txt`.
"""
import argparse
import pathlib
import sys

from rhlab.assembly import parse_config, run_experiment

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("name", help="config name (file stem under configs/)")
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    path = CONFIG_DIR / f"{args.name}.txt"
    if not path.exists():
        known = ", ".join(sorted(p.stem for p in CONFIG_DIR.glob("*.txt")))
        sys.exit(f"unknown config {args.name!r}; known: {known}")
    cfg = parse_config(str(path))
    manifest = run_experiment(str(path), out_dir=args.out, seed=args.seed)
    print(f"{cfg['experiment']}: wrote {manifest['artifacts']} to {args.out} "
          f"in {manifest['wall_time_s']:.1f}s")


if __name__ == "__main__":
    main()
