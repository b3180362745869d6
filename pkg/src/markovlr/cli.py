"""Command line entry point.

Exit status is 0 when every bound held and every precondition was met, 1 on a
bound violation or failed precondition, and 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .bounds import PreconditionError
from .config import ConfigError, apply_overrides, build_config, load_raw, CONFIG_VERSION
from .experiments import run_experiment, timed, write_outputs

log = logging.getLogger("markovlr")

SUBCOMMANDS = {
    "simulate": "evolve a product state and record expectation values",
    "lr": "commutator growth against the Lieb-Robinson bound",
    "quasilocal": "truncated against full evolution, against the quasi-locality bound",
    "trotter": "light-cone Trotter circuit error against its bound over a dt sweep",
    "selftest": "series lemmas, norm duality and CPT spot checks",
    "sweep": "run one experiment over a list of values of a config key",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovlr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML config file (defaults are used when omitted)")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted config key, e.g. model.params.gamma=0.2 (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        raw = load_raw(args.config) if args.config else {"version": CONFIG_VERSION, "seed": 0}
        overrides = list(args.override)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides.append(("seed", args.seed))
        cfg = build_config(apply_overrides(raw, overrides))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result, elapsed = timed(run_experiment, cfg, args.command, args.jobs)
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = write_outputs(result, cfg, args.out, elapsed)
    print(json.dumps({"kind": result.kind, "rows": len(result.rows), "violations": result.violations,
                      "precondition_failures": result.precondition_failures, "csv": str(path),
                      "elapsed_seconds": round(elapsed, 2)}))
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
