"""Command-line entry point.

    hdlsd {simulate,esd,lsd,compare,taper,validate} --config PATH --out DIR
          [--seed N] [--threads N]

Exit status: 0 on success, 2 if some cells failed, 1 on a config error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .harness import MODES, RUNNERS, ConfigError, ExperimentConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdlsd",
        description="Spectra of high-dimensional sample autocovariance matrices.")
    parser.add_argument("command", choices=MODES)
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ExperimentConfig.load(args.config)
        overrides = {"mode": args.command}
        if args.seed is not None:
            overrides["seed"] = args.seed
        config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"hdlsd: {exc}", file=sys.stderr)
        return 1
    if args.threads < 1:
        print("hdlsd: --threads must be at least 1", file=sys.stderr)
        return 1
    report = RUNNERS[args.command](config, args.out, threads=args.threads)
    for failure in report.failures:
        print(f"hdlsd: cell failed: {failure}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
