"""Command-line entry point: ``boussinesq-lab <experiment> [options]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import KINDS, load_config
from .harness import RUNNERS
from .spectral import THREADS_ENV

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boussinesq-lab", description="Stratified Boussinesq numerical laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="TOML or JSON configuration file")
        p.add_argument("--seed", type=int, help="64-bit seed for the initial data")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help=f"FFT worker count (overrides ${THREADS_ENV})")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config, kind=args.command, seed=args.seed, out=args.out, threads=_threads(args.threads))
    report = RUNNERS[args.command](cfg)
    status = "PASS" if report.get("passed") else "FAIL"
    print(f"{args.command}: {status} (outputs in {cfg.out})")
    return 0 if report.get("passed") else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
