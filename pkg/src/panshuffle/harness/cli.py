"""Command-line entry point: ``panshuffle --experiment NAME [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import EXPERIMENTS, load_config
from .experiments import default_config, run_experiment, to_csv

SEED_ENV = "PANSHUFFLE_SEED"

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panshuffle", description=__doc__)
    parser.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    parser.add_argument("--config", help="INI file with a section named after the experiment")
    parser.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV}, then 0")
    parser.add_argument("--out", help="CSV output path (stdout when omitted)")
    parser.add_argument("--trials", type=int, default=None, help="override the trial count of every grid point")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")
    parser.add_argument("--timing", action="store_true", help="add a wall_time column (breaks byte-identical output)")
    parser.add_argument("--select", default=None,
                        help="lemma-suite only: '+'-separated checks to run; an empty string runs none")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config, args.experiment) if args.config else default_config(args.experiment)
    # precedence: --seed, then a seed in the config file, then the environment
    if args.seed is not None:
        cfg.seed = args.seed
    elif not cfg.seed_given and SEED_ENV in os.environ:
        cfg.seed = int(os.environ[SEED_ENV])
    if args.out:
        cfg.out = args.out
    cfg.trials = args.trials
    cfg.jobs = max(1, args.jobs)
    if args.select is not None:
        if args.experiment != "lemma-suite":
            print("--select only applies to lemma-suite", file=sys.stderr)
            return EXIT_INVALID
        cfg.points = [dict(select=args.select)] if args.select else []

    result = run_experiment(cfg)
    text = to_csv(result, timing=args.timing)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    for r in result.rows:
        if r.acceptance:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status} {r.experiment} point={r.point} {r.metric}={r.value:.6g} (threshold {r.threshold:.6g})",
                  file=sys.stderr)
    for i, _, message in result.errors:
        print(f"ERROR point={i}: {message}", file=sys.stderr)
    if not result.ok:
        return EXIT_FAILED
    return EXIT_INVALID if result.errors else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
