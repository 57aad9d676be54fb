"""Command-line front end.

Exit codes: 0 ran and feasible (noncontextual), 3 ran and infeasible
(contextual), 1 error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_config, parse_angle
from .errors import ArtifactError, ConfigError
from .experiment import (
    SWEEP_PARAMETERS,
    check_model,
    emit_fixtures,
    format_report,
    run,
    sweep,
    write_outputs,
)

EXIT_FEASIBLE = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 3


def _grid(args: argparse.Namespace) -> list:
    if args.values is not None:
        raw = [v for v in args.values.split(",") if v.strip()]
    elif args.range is not None:
        try:
            start, stop, step = (float(x) for x in args.range.split(":"))
        except ValueError:
            raise ConfigError("--range", f"expected start:stop:step, got {args.range!r}") from None
        if step <= 0:
            raise ConfigError("--range", "step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        raw = [repr(float(x)) for x in np.round(start + step * np.arange(max(n, 0)), 12)]
    else:
        raise ConfigError("--values/--range", "one of them is required")
    if args.param == "shots":
        try:
            return [int(float(v)) for v in raw]
        except ValueError:
            raise ConfigError("--values", "shot counts must be integers") from None
    if args.param in ("theta", "theta_prime", "phi", "phi_prime"):
        return [parse_angle(f"{v.strip()} {args.unit}", "--values") for v in raw]
    try:
        return [float(v) for v in raw]
    except ValueError:
        raise ConfigError("--values", f"cannot parse {raw!r} as numbers") from None


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    report = run(cfg)
    write_outputs(report, cfg)
    print(format_report(report))
    return EXIT_FEASIBLE if report.section.feasible else EXIT_INFEASIBLE


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    grid = _grid(args)
    reports, text = sweep(cfg, args.param, grid, workers=args.workers)
    out = args.csv or cfg.output.csv
    if out:
        Path(out).write_text(text)
    print(f"{'value':>14}  {'S':>16}  verdict")
    for v, r in zip(grid, reports):
        shown = str(v) if isinstance(v, int) else f"{v:.9g}"
        print(f"{shown:>14}  {r.S:+16.12f}  {r.section.verdict}")
    return EXIT_FEASIBLE if all(r.section.feasible for r in reports) else EXIT_INFEASIBLE


def cmd_check_model(args: argparse.Namespace) -> int:
    report, section = check_model(args.path, mode=args.mode, tol=args.tol, project=args.project)
    print(f"compatibility  {'pass' if report.passed else 'FAIL'} (max deviation {report.max_deviation:.3e})")
    for row in report.overlaps:
        print(f"  {'/'.join(row.first)} vs {'/'.join(row.second)} on {{{','.join(row.overlap)}}}: {row.max_deviation:.3e}")
    print(f"global section {section.verdict.upper()} [{section.mode} mode]")
    if section.certificate is not None:
        print(f"  certificate  {section.certificate.describe()}")
    if section.witness is not None:
        for g, q in section.witness.items():
            print(f"  witness      {' '.join(f'{o:+d}' if isinstance(o, int) else str(o) for o in g)}  {q}")
    return EXIT_FEASIBLE if section.feasible else EXIT_INFEASIBLE


def cmd_emit_fixtures(args: argparse.Namespace) -> int:
    for path in emit_fixtures(args.directory):
        print(path)
    return EXIT_FEASIBLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a TOML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rerun a config over a parameter grid and emit CSV")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated grid values")
    g.add_argument("--range", help="start:stop:step (inclusive stop)")
    p.add_argument("--unit", choices=("deg", "rad"), default="deg", help="unit of angle grids")
    p.add_argument("--csv", help="CSV output path (overrides output.csv)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-model", help="decide a model file from the interchange format")
    p.add_argument("path")
    p.add_argument("--mode", choices=("float", "exact"), default="float")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--project", action="store_true", help="project finite-sample tables onto compatible ones first")
    p.set_defaults(func=cmd_check_model)

    p = sub.add_parser("emit-fixtures", help="write the canonical PR-box, Phi+, product and deterministic models")
    p.add_argument("directory")
    p.set_defaults(func=cmd_emit_fixtures)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ArtifactError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
