"""End-to-end pipeline: source -> network -> conditioning -> empirical model
-> compatibility -> CHSH -> global section.

Every random draw derives from the config's root seed through labeled
substreams, so a report is a pure function of the config.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import modelio, rng
from .config import ExperimentConfig, PreparationConfig, StatisticsConfig
from .errors import ConfigError, UnknownParameter
from .gates import analyzer_ket, phi_plus
from .linalg import DensityOperator, Ket, eig_hermitian, partial_trace, tensor_states
from .measure import TSIRELSON_ANGLES, monte_carlo_model
from .model import PM, CompatibilityReport, EmpiricalModel, check_compatibility, chsh_scenario
from .process import (
    Effect,
    JonesSource,
    bell_like_with_visibility,
    bell_network,
    condition,
    ensemble_state,
    parity_flag_network,
)
from .sheaf import (
    SectionResult,
    chsh_contexts,
    chsh_family_value,
    context_correlation,
    global_section,
    induce_model,
    no_signalling_projection,
)

REPORT_FORMAT = "artifact-run-report 1"
CSV_HEADER = "# artifact-sweep-csv 1"
CSV_COLUMNS = [
    "index",
    "parameter",
    "value",
    "S",
    "S_family_max",
    "E_ab",
    "E_ab'",
    "E_a'b",
    "E_a'b'",
    "success_prob",
    "max_compat_dev",
    "verdict",
    "certificate_value",
]
SWEEP_PARAMETERS = ("visibility", "shots", "theta", "theta_prime", "phi", "phi_prime", "concentration")


@dataclass(frozen=True)
class StateSummary:
    eigenvalues: tuple[float, ...]
    purity: float
    success_prob: float | None  # global probability of the retained flag event
    context_acceptance: tuple[float, ...] | None  # per-context retained fraction (sampled mode)


@dataclass(frozen=True)
class RunReport:
    state: StateSummary
    model: EmpiricalModel  # the model the decision was made on
    raw_model: EmpiricalModel  # as measured (differs from ``model`` only in sampled mode)
    correlations: tuple[float, ...]  # contexts (a,b), (a,b'), (a',b), (a',b')
    S: float
    S_family_max: float
    compatibility: CompatibilityReport
    section: SectionResult
    seconds: float

    def to_dict(self) -> dict:
        """Machine-readable form; excludes timing so it is reproducible byte for byte."""
        sec = self.section
        cert = None
        if sec.certificate is not None:
            c = sec.certificate
            cert = {
                "kind": c.kind,
                "description": c.describe(),
                "value": _num(c.value),
                "bound": _num(c.bound),
                "variant": str(c.variant) if c.variant else None,
            }
        witness = None
        if sec.witness is not None:
            witness = [
                {"assignment": [int(o) if isinstance(o, int) else str(o) for o in g], "p": _num(q)}
                for g, q in sec.witness.items()
            ]
        return {
            "format": REPORT_FORMAT,
            "state": {
                "eigenvalues": list(self.state.eigenvalues),
                "purity": self.state.purity,
                "success_prob": self.state.success_prob,
                "context_acceptance": list(self.state.context_acceptance)
                if self.state.context_acceptance is not None
                else None,
            },
            "provenance": {
                "kind": self.raw_model.provenance.kind,
                "shots": self.raw_model.provenance.shots,
                "seed": self.raw_model.provenance.seed,
            },
            "correlations": dict(zip(["ab", "ab'", "a'b", "a'b'"], self.correlations)),
            "S": self.S,
            "S_family_max": self.S_family_max,
            "compatibility": {
                "passed": self.compatibility.passed,
                "tol": self.compatibility.tol,
                "max_deviation": self.compatibility.max_deviation,
            },
            "section": {
                "verdict": sec.verdict,
                "mode": sec.mode,
                "tol": sec.tol,
                "iterations": sec.iterations,
                "max_residual": sec.max_residual,
                "rounding_radius": sec.rounding_radius,
                "certificate": cert,
                "witness": witness,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _num(v) -> float | str:
    if isinstance(v, Fraction):
        return format(v)
    return float(v)


def _jones(cfg: ExperimentConfig) -> JonesSource:
    s = cfg.source
    return JonesSource(
        s.kind,
        rng.derive_seed(cfg.seed, "source"),
        ket=s.ket,
        low=s.low,
        high=s.high,
        mean=s.mean,
        kappa=s.kappa,
        weight=s.weight,
    )


def prepare_state(cfg: ExperimentConfig) -> tuple[DensityOperator, float | None]:
    """Conditioned two-beam state and the success probability of conditioning."""
    prep = cfg.preparation
    if prep.network == "visibility_preset":
        return bell_like_with_visibility(prep.visibility), None
    if prep.network == "hadamard_cnot":
        network, ancilla = bell_network()
    elif prep.network == "parity_flag":
        network, ancilla, _ = parity_flag_network()
    else:
        network, ancilla = prep.unitary, prep.ancilla
    rho = ensemble_state(_jones(cfg), network, ancilla, cfg.source.samples, workers=cfg.source.workers)
    if len(rho.factor_dims) == 2:
        return rho, None
    if cfg.conditioning.discard:
        return partial_trace(rho, [0, 1]), None
    flag = cfg.conditioning.flag
    if flag is None or flag >= rho.factor_dims[-1]:
        raise ConfigError("conditioning.flag", f"flag index must be below {rho.factor_dims[-1]}")
    return condition(rho, Effect.flag(flag, rho.factor_dims[-1]))


def run(cfg: ExperimentConfig) -> RunReport:
    t0 = time.perf_counter()
    rho, p_success = prepare_state(cfg)
    eigvals, _ = eig_hermitian(rho.op)
    acceptance = None
    stats = cfg.statistics
    if stats.mode == "analytic":
        raw = induce_model(rho, cfg.angles)
        decided = raw
        compat = check_compatibility(raw, tol=1e-10)
    else:
        raw = monte_carlo_model(rho, cfg.angles, stats.shots, rng.derive_seed(cfg.seed, "shots"))
        # finite samples signal by statistical noise; judge at ~5 standard errors
        compat = check_compatibility(raw, tol=5.0 / math.sqrt(stats.shots))
        decided, _ = no_signalling_projection(raw)
        if p_success is not None:
            acceptance = tuple(
                stats.shots / (stats.shots + int(rng.stream(cfg.seed, "acceptance", k).negative_binomial(stats.shots, p_success)))
                for k in range(4)
            )
    section = global_section(decided, mode=cfg.solver.mode, tol=cfg.solver.tol)
    contexts = chsh_contexts(raw.scenario)
    corr = tuple(float(context_correlation(raw, c)) for c in contexts)
    s_value = corr[0] + corr[1] + corr[2] - corr[3]
    family, _ = chsh_family_value(raw)
    state = StateSummary(tuple(eigvals), rho.purity(), p_success, acceptance)
    return RunReport(state, decided, raw, corr, s_value, float(family), compat, section, time.perf_counter() - t0)


def write_outputs(report: RunReport, cfg: ExperimentConfig) -> None:
    if cfg.output.model:
        modelio.write(report.raw_model, cfg.output.model)
    if cfg.output.report:
        Path(cfg.output.report).write_text(report.to_json())


def format_report(report: RunReport) -> str:
    st = report.state
    lines = ["conditioned state"]
    lines.append("  eigenvalues   " + "  ".join(f"{v:+.6f}" for v in st.eigenvalues))
    lines.append(f"  purity        {st.purity:.6f}")
    if st.success_prob is not None:
        lines.append(f"  success prob  {st.success_prob:.6f} (global)")
    if st.context_acceptance is not None:
        lines.append("  acceptance    " + "  ".join(f"{v:.6f}" for v in st.context_acceptance) + " (per context)")
    prov = report.raw_model.provenance
    lines.append(f"empirical model ({prov.kind}" + (f", {prov.shots} shots/context" if prov.shots else "") + ")")
    sc = report.raw_model.scenario
    for c in sc.contexts:
        cells = "  ".join(
            f"p({','.join(f'{o:+d}' for o in s)})={float(p):.6f}" for s, p in report.raw_model.tables[c].items()
        )
        lines.append(f"  {'/'.join(c):6s} {cells}")
    lines.append("correlations   " + "  ".join(f"E({'/'.join(c)})={e:+.9f}" for c, e in zip(sc.contexts, report.correlations)))
    lines.append(f"CHSH S         {report.S:+.12f}   (max over sign variants {report.S_family_max:.12f})")
    comp = report.compatibility
    lines.append(f"compatibility  {'pass' if comp.passed else 'FAIL'} (max deviation {comp.max_deviation:.3e}, tol {comp.tol:.1e})")
    sec = report.section
    lines.append(f"global section {sec.verdict.upper()} [{sec.mode} mode, {sec.iterations} pivots]")
    if sec.certificate is not None:
        lines.append(f"  certificate  {sec.certificate.describe()}")
    if sec.witness is not None:
        lines.append(f"  witness      {len(sec.witness)} global assignments, residual {sec.max_residual:.2e}")
    if sec.rounding_radius:
        lines.append(f"  rounding     inputs rounded to 1e-12 grid, radius {sec.rounding_radius:.2e}")
    lines.append(f"time           {report.seconds * 1e3:.1f} ms")
    return "\n".join(lines)


def _apply(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "visibility":
        if cfg.preparation.network != "visibility_preset":
            raise ConfigError("preparation.network", "visibility sweeps need network = 'visibility_preset'")
        if not 0.0 <= float(value) <= 1.0:
            raise ConfigError("sweep.grid", f"visibility {value} outside [0, 1]")
        return replace(cfg, preparation=PreparationConfig("visibility_preset", visibility=float(value)))
    if parameter == "shots":
        if int(value) < 1:
            raise ConfigError("sweep.grid", f"shots must be >= 1, got {value}")
        return replace(cfg, statistics=StatisticsConfig("shots", int(value)))
    if parameter in ("theta", "theta_prime", "phi", "phi_prime"):
        return replace(cfg, angles=replace(cfg.angles, **{parameter: float(value)}))
    if parameter == "concentration":
        if cfg.source.kind != "von_mises_linear":
            raise ConfigError("source.kind", "concentration sweeps need kind = 'von_mises_linear'")
        return replace(cfg, source=replace(cfg.source, kappa=float(value)))
    raise UnknownParameter("sweep.parameter", f"unknown parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")


def _row(index: int, parameter: str, value, report: RunReport) -> dict:
    sec = report.section
    return {
        "index": index,
        "parameter": parameter,
        "value": repr(float(value)) if not isinstance(value, int) else str(value),
        "S": repr(report.S),
        "S_family_max": repr(report.S_family_max),
        "E_ab": repr(report.correlations[0]),
        "E_ab'": repr(report.correlations[1]),
        "E_a'b": repr(report.correlations[2]),
        "E_a'b'": repr(report.correlations[3]),
        "success_prob": "" if report.state.success_prob is None else repr(report.state.success_prob),
        "max_compat_dev": repr(report.compatibility.max_deviation),
        "verdict": sec.verdict,
        "certificate_value": "" if sec.certificate is None else repr(float(sec.certificate.value)),
    }


def sweep(
    cfg: ExperimentConfig, parameter: str, grid: Sequence, workers: int = 1
) -> tuple[list[RunReport], str]:
    """One run per grid value; rows come back in grid order whatever ``workers`` is.

    Angle values are radians. Returns the reports and the CSV text.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise UnknownParameter("sweep.parameter", f"unknown parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")
    grid = list(grid)
    if not grid:
        raise ConfigError("sweep.grid", "grid is empty")
    configs = [_apply(cfg, parameter, v) for v in grid]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, configs))
    else:
        reports = [run(c) for c in configs]
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for i, (v, r) in enumerate(zip(grid, reports)):
        writer.writerow(_row(i, parameter, v, r))
    return reports, buf.getvalue()


def check_model(
    path: str | Path, mode: str = "float", tol: float = 1e-8, project: bool = False
) -> tuple[CompatibilityReport, SectionResult]:
    """Compatibility report and global-section verdict for a model file.

    ``project`` replaces the tables by their correlator-space projection
    first, which finite-sample files need.
    """
    model = modelio.read(path)
    if project:
        model, _ = no_signalling_projection(model)
    report = check_compatibility(model, tol=tol if mode == "float" else 1e-10)
    return report, global_section(model, mode=mode, tol=tol)


def pr_box() -> EmpiricalModel:
    """Perfect correlation in three contexts, perfect anticorrelation in (a', b')."""
    sc = chsh_scenario()
    half = Fraction(1, 2)
    tables = {}
    for c in sc.contexts:
        anti = c == ("a'", "b'")
        tables[c] = {(o, o2): half if (o == o2) != anti else Fraction(0) for o in PM for o2 in PM}
    return EmpiricalModel(sc, tables)


def deterministic_model(values: dict[str, int]) -> EmpiricalModel:
    """Point-mass model of one global assignment."""
    sc = chsh_scenario()
    tables = {
        c: {s: Fraction(int(all(values[x] == o for x, o in zip(c, s)))) for s in sc.assignments(c)}
        for c in sc.contexts
    }
    return EmpiricalModel(sc, tables)


FIXTURES = {
    "pr_box.model": lambda: pr_box(),
    "deterministic.model": lambda: deterministic_model({"a": +1, "a'": -1, "b": +1, "b'": -1}),
    "phi_plus_tsirelson.model": lambda: induce_model(phi_plus().density(), TSIRELSON_ANGLES),
    "product_tsirelson.model": lambda: induce_model(
        tensor_states(Ket.basis(0).density(), analyzer_ket(math.pi / 8).density()), TSIRELSON_ANGLES
    ),
}


def emit_fixtures(directory: str | Path) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in FIXTURES.items():
        modelio.write(make(), out / name)
        written.append(out / name)
    return written
