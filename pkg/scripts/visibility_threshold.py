"""Locate the visibility at which the global-section verdict flips.

Bisects on v for v |Phi+><Phi+| + (1 - v) I/4 at the Tsirelson angles and
compares the crossing with 1/sqrt(2). Optionally writes the coarse grid as
sweep CSV.
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from artifact.config import ExperimentConfig, PreparationConfig, SolverConfig
from artifact.experiment import run, sweep
from artifact.measure import TSIRELSON_ANGLES


def feasible_at(v: float, mode: str) -> bool:
    cfg = ExperimentConfig(
        preparation=PreparationConfig("visibility_preset", visibility=v),
        angles=TSIRELSON_ANGLES,
        solver=SolverConfig(mode, 1e-8),
    )
    return run(cfg).section.feasible


def bisect(mode: str, precision: float) -> tuple[float, int]:
    lo, hi, steps = 0.0, 1.0, 0
    while hi - lo > precision:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if feasible_at(mid, mode) else (lo, mid)
        steps += 1
    return (lo + hi) / 2, steps


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--precision", type=float, default=1e-6)
    parser.add_argument("--mode", choices=("float", "exact"), default="float")
    parser.add_argument("--csv", type=Path, help="also write a 0:1:0.05 sweep here")
    args = parser.parse_args()

    v_star, steps = bisect(args.mode, args.precision)
    print(f"mode            {args.mode}")
    print(f"bisection       {steps} steps to width {args.precision:g}")
    print(f"v*              {v_star:.9f}")
    print(f"1/sqrt(2)       {1 / math.sqrt(2):.9f}")
    print(f"difference      {v_star - 1 / math.sqrt(2):+.2e}")

    if args.csv:
        cfg = ExperimentConfig(preparation=PreparationConfig("visibility_preset", visibility=0.0), angles=TSIRELSON_ANGLES)
        grid = list(np.round(np.arange(0, 1.0001, 0.05), 12))
        _, text = sweep(cfg, "visibility", grid)
        args.csv.write_text(text)
        print(f"grid written to {args.csv}")


if __name__ == "__main__":
    main()
