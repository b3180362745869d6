"""Shared plumbing for the experiment scripts: load a config, run it, write and print the table."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from markovlr.config import load_config
from markovlr.experiments import run_experiment, timed, write_outputs

ROOT = Path(__file__).resolve().parents[1]


def main(default_config: str, kind: str, columns: list, doc: str) -> int:
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--config", default=str(ROOT / "configs" / default_config))
    ap.add_argument("--out", default=str(ROOT / "results" / kind))
    ap.add_argument("--override", action="append", default=[])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(args.config, args.override)
    result, elapsed = timed(run_experiment, cfg, kind, args.jobs)
    write_outputs(result, cfg, args.out, elapsed)
    print("  ".join(f"{c:>12}" for c in columns))
    for row in result.rows:
        cells = []
        for c in columns:
            v = row.get(c)
            cells.append(f"{v:12.4e}" if isinstance(v, float) else f"{str(v):>12}")
        print("  ".join(cells))
    for key, val in result.summary.items():
        print(f"{key}: {val}")
    print(f"violations={result.violations} precondition_failures={result.precondition_failures} "
          f"solver_error={result.solver_error:.2e} elapsed={elapsed:.1f}s -> {args.out}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit("run one of the experiment scripts instead")
