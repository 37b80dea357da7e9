"""Command line entry point.

Exit codes: 0 success, 1 configuration invalid, 2 runtime failure
(including an exact check that exceeded its tolerance).
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .runner import VerificationFailed, execute

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percolab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True, help="experiment INI file")
    run.add_argument("--seed", type=int, help="override [experiment] seed")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--workers", type=int, help="worker processes")
    val = sub.add_parser("validate", help="check a configuration without running it")
    val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        _, diags = load_config(args.config)
        for d in diags:
            print(f"{args.config}: {d}", file=sys.stderr)
        return EXIT_INVALID if diags else EXIT_OK
    cfg, diags = load_config(args.config, seed=args.seed, output=args.out, workers=args.workers)
    if diags:
        for d in diags:
            print(f"{args.config}: {d}", file=sys.stderr)
        return EXIT_INVALID
    try:
        manifest = execute(cfg)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to one exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.kind}: wrote {len(manifest['outputs']) + 1} files to {cfg.output}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
