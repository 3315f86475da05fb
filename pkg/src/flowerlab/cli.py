"""Command line entry point: ``flowerlab <subcommand> [--config] [--seed] [--out]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ExperimentConfig, load_config
from .errors import FlowerLabError
from .experiments import EXPERIMENTS
from .export import export_datasets

log = logging.getLogger("flowerlab")

HELP = {
    "flower1d": "Leau-Fatou checks for a one-variable germ",
    "calibrate": "fit forward and backward petal parameters",
    "invariants": "invariance and multiplicativity of psi_I",
    "fatou": "chart round trip and Fatou-coordinate conjugacy",
    "classify": "label a polydisc cloud by petal capture",
    "thmA": "full petal-covering verification",
    "thmB": "escape of forward and backward orbits",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowerlab", description="Numerical lab for parabolic flowers in several variables.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", help="YAML experiment config (defaults apply when omitted)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output directory (overrides the config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ValueError("--seed must be non-negative")
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        log.info("running %s with seed %d", args.command, cfg.seed)
        run = EXPERIMENTS[args.command](cfg)
    except (FlowerLabError, ValueError, OSError) as exc:
        print(f"flowerlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in export_datasets(run, cfg.out):
        print(path)
    verdict = run.report.get("pass")
    if verdict is not None:
        print(f"{args.command}: {'PASS' if verdict else 'FAIL'}")
        return 0 if verdict else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
