"""Command-line entry point: ``sharpshooter <verb> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, desk_config, load_config
from .errors import ContractError, NumericError, PrerequisiteError
from .pipeline import VERBS, run_command
from .results import METHODS

EXIT_OK, EXIT_CONFIG, EXIT_PREREQ, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("sharpshooter")


def parse_args(argv=None):
    ap = argparse.ArgumentParser(prog="sharpshooter", description=__doc__)
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="experiment JSON; the built-in desk experiment if omitted")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="base seed (overrides the config)")
    ap.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for explain/sweep")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else desk_config()
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        methods = None
        if args.methods:
            methods = [m.strip() for m in args.methods.split(",") if m.strip()]
            bad = [m for m in methods if m not in METHODS]
            if bad or not methods:
                raise ConfigError("--methods", f"unknown method(s) {bad}; choose from {METHODS}")
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        manifest = run_command(args.verb, cfg, args.out, methods, args.jobs)
    except PrerequisiteError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("wrote %d artifacts", len(manifest["artifacts"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
