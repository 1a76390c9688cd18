"""The `lab` command.

    lab <subcommand> --config <path> [--out <dir>] [--seed <u64>]

One subcommand per experiment kind plus `all`.  Exit codes: 0 every check
passed, 2 config error, 3 invariant violation or failed check, 4 numerical
failure (eigensolver non-convergence, singular hitting system).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import EXPERIMENT_KINDS, parse_config
from .errors import ConfigError, LabError, NumericalFailure
from .runner import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Seeded verification experiments over tilted kernels, "
                    "spectra, and binary-reward paths.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for kind in EXPERIMENT_KINDS + ("all",):
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, expected_experiment=args.subcommand)
        if args.seed is not None:
            if not (0 <= args.seed < 2**64):
                raise ConfigError(f"seed: {args.seed} outside u64 range")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.subcommand == "all":
            cfg = dataclasses.replace(cfg, experiment="all")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        manifest = run(cfg, out_dir=args.out)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LabError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    for check in manifest.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name} worst={check.worst_residual:.3e} {check.detail}")
    print(f"manifest: config {manifest.config_digest[:12]} "
          f"backend={manifest.kernel_backend} ok={manifest.ok}")
    return EXIT_OK if manifest.ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
