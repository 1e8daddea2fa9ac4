"""Command line entry point: ``corr1d run`` and ``corr1d compare``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .errors import ConfigError, Corr1dError, GridMismatch, RunFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("corr1d")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corr1d", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a run config")
    run.add_argument("config", help="TOML run configuration")
    run.add_argument("--threads", type=_positive_int, default=None,
                     help="worker threads (default: $CORR1D_THREADS, else all cores)")
    run.add_argument("--output", default=None, help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, default=None, help="master seed (overrides seed)")
    run.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    cmp_ = sub.add_parser("compare", help="compare two results CSV files")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--report", default=None, help="also write the JSON report here")
    return ap


def _run(args) -> int:
    from .experiments import execute, load_config

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("seed must be a non-negative 64-bit integer", key="--seed")
            cfg.seed = args.seed
            cfg.raw = dict(cfg.raw, seed=args.seed)
    except ConfigError as exc:
        print(f"corr1d: config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = execute(cfg, threads=args.threads, output_dir=args.output, plots=not args.no_plots)
    except RunFailure as exc:
        where = f" (seed {exc.seed}, realization {exc.realization})" if exc.seed is not None else ""
        print(f"corr1d: run failed{where}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Corr1dError as exc:
        print(f"corr1d: run failed (seed {cfg.seed}): {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"corr1d: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


def _compare(args) -> int:
    from .experiments import compare

    try:
        report = compare(args.a, args.b)
    except GridMismatch as exc:
        print(f"corr1d: grid mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, StopIteration, KeyError) as exc:
        print(f"corr1d: cannot read results: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(report, indent=2)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _run(args)
    return _compare(args)


if __name__ == "__main__":
    sys.exit(main())
