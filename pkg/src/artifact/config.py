"""Experiment configuration: a TOML file with one table per pipeline stage.

Angles are strings carrying a unit, e.g. ``"22.5 deg"`` or ``"-pi/8 rad"``.
Unknown keys anywhere are errors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .linalg import Ket, Operator, ket_tensor
from .measure import ChshAngles

NETWORKS = ("hadamard_cnot", "parity_flag", "visibility_preset", "explicit")
SOURCE_KINDS = ("fixed", "uniform_linear", "von_mises_linear", "depolarized_mix")

_ANGLE = re.compile(
    r"""^\s*(?P<sign>[+-])?\s*
    (?:(?P<coef>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\*?\s*)?
    (?P<pi>pi)?
    (?:\s*/\s*(?P<den>\d+(?:\.\d*)?))?
    \s+(?P<unit>deg|rad)\s*$""",
    re.VERBOSE,
)


def parse_angle(text: Any, path: str) -> float:
    """``"<number> deg"``, ``"<number> rad"`` or ``"[k*]pi[/n] rad"`` -> radians."""
    if not isinstance(text, str):
        raise ConfigError(path, f"angle must be a string with a unit ('deg' or 'rad'), got {text!r}")
    m = _ANGLE.match(text)
    if not m or (m["coef"] is None and m["pi"] is None):
        raise ConfigError(path, f"cannot parse angle {text!r}; expected e.g. '22.5 deg' or 'pi/8 rad'")
    value = float(m["coef"]) if m["coef"] is not None else 1.0
    if m["pi"]:
        if m["unit"] != "rad":
            raise ConfigError(path, "multiples of pi are only allowed in radians")
        value *= math.pi
    if m["den"] is not None:
        value /= float(m["den"])
    if m["sign"] == "-":
        value = -value
    return math.radians(value) if m["unit"] == "deg" else value


def format_angle(radians: float) -> str:
    return f"{radians!r} rad"


def _complex(v: Any, path: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(path, f"expected a number or a [re, im] pair, got {v!r}")


_NAMED_KETS = {
    "0": [1, 0],
    "1": [0, 1],
    "+": [1 / math.sqrt(2), 1 / math.sqrt(2)],
    "-": [1 / math.sqrt(2), -1 / math.sqrt(2)],
}


def parse_ket(v: Any, path: str) -> Ket:
    """Named qubit ("0", "1", "+", "-"), a list of names (tensor product),
    or an explicit amplitude list (entries numbers or [re, im])."""
    if isinstance(v, str):
        if v not in _NAMED_KETS:
            raise ConfigError(path, f"unknown ket name {v!r}; use one of {sorted(_NAMED_KETS)}")
        return Ket(np.array(_NAMED_KETS[v], dtype=complex))
    if isinstance(v, list) and v and all(isinstance(x, str) for x in v):
        return ket_tensor(*(parse_ket(x, f"{path}[{i}]") for i, x in enumerate(v)))
    if isinstance(v, list) and v:
        amp = np.array([_complex(x, f"{path}[{i}]") for i, x in enumerate(v)])
        try:
            return Ket(amp)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    raise ConfigError(path, f"cannot interpret {v!r} as a ket")


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "fixed"
    ket: Ket | None = None
    low: float = 0.0
    high: float = math.pi
    mean: float = 0.0
    kappa: float = 0.0
    weight: float = 1.0
    samples: int = 1
    workers: int = 1


@dataclass(frozen=True)
class PreparationConfig:
    network: str = "hadamard_cnot"
    visibility: float | None = None
    unitary: Operator | None = None
    ancilla: Ket | None = None


@dataclass(frozen=True)
class ConditioningConfig:
    flag: int | None = None  # retained flag basis index on the last factor
    discard: bool = False  # trace the flag out instead of conditioning


@dataclass(frozen=True)
class StatisticsConfig:
    mode: str = "analytic"
    shots: int | None = None


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "float"
    tol: float = 1e-8


@dataclass(frozen=True)
class OutputConfig:
    model: str | None = None
    report: str | None = None
    csv: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    source: SourceConfig = field(default_factory=SourceConfig)
    preparation: PreparationConfig = field(default_factory=PreparationConfig)
    conditioning: ConditioningConfig = field(default_factory=ConditioningConfig)
    angles: ChshAngles = ChshAngles(0.0, math.pi / 4, math.pi / 8, -math.pi / 8)
    statistics: StatisticsConfig = field(default_factory=StatisticsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


def _check_keys(table: dict, allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _table(doc: dict, key: str) -> dict:
    t = doc.get(key, {})
    if not isinstance(t, dict):
        raise ConfigError(key, "expected a table")
    return t


def _int(v: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _float(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _choice(v: Any, path: str, options: tuple[str, ...]) -> str:
    if v not in options:
        raise ConfigError(path, f"expected one of {', '.join(options)}, got {v!r}")
    return v


def _source(t: dict) -> SourceConfig:
    _check_keys(t, {"kind", "ket", "low", "high", "mean", "concentration", "weight", "samples", "workers"}, "source")
    kind = _choice(t.get("kind", "fixed"), "source.kind", SOURCE_KINDS)
    ket = parse_ket(t["ket"], "source.ket") if "ket" in t else None
    if kind in ("fixed", "depolarized_mix") and ket is None:
        ket = Ket.basis(0)
    if ket is not None and ket.dim != 2:
        raise ConfigError("source.ket", "source ket must be a single-beam (2-dim) ket")
    cfg = SourceConfig(
        kind=kind,
        ket=ket,
        low=parse_angle(t["low"], "source.low") if "low" in t else 0.0,
        high=parse_angle(t["high"], "source.high") if "high" in t else math.pi,
        mean=parse_angle(t["mean"], "source.mean") if "mean" in t else 0.0,
        kappa=_float(t.get("concentration", 0.0), "source.concentration"),
        weight=_float(t.get("weight", 1.0), "source.weight"),
        samples=_int(t.get("samples", 1), "source.samples", 1),
        workers=_int(t.get("workers", 1), "source.workers", 1),
    )
    if cfg.kappa < 0:
        raise ConfigError("source.concentration", "must be >= 0")
    if not 0.0 <= cfg.weight <= 1.0:
        raise ConfigError("source.weight", "must lie in [0, 1]")
    if kind == "uniform_linear" and not cfg.high > cfg.low:
        raise ConfigError("source.high", "must exceed source.low")
    return cfg


def _preparation(t: dict) -> PreparationConfig:
    _check_keys(t, {"network", "visibility", "unitary", "factor_dims", "ancilla"}, "preparation")
    if "network" not in t:
        raise ConfigError("preparation.network", f"required; one of {', '.join(NETWORKS)}")
    net = _choice(t["network"], "preparation.network", NETWORKS)
    extra = {"visibility_preset": {"visibility"}, "explicit": {"unitary", "factor_dims", "ancilla"}}
    for key in ("visibility", "unitary", "factor_dims", "ancilla"):
        if key in t and key not in extra.get(net, set()):
            raise ConfigError(f"preparation.{key}", f"not allowed with network {net!r}")
    if net == "visibility_preset":
        if "visibility" not in t:
            raise ConfigError("preparation.visibility", "required for visibility_preset")
        v = _float(t["visibility"], "preparation.visibility")
        if not 0.0 <= v <= 1.0:
            raise ConfigError("preparation.visibility", f"must lie in [0, 1], got {v}")
        return PreparationConfig(net, visibility=v)
    if net == "explicit":
        for key in ("unitary", "factor_dims", "ancilla"):
            if key not in t:
                raise ConfigError(f"preparation.{key}", "required for an explicit network")
        rows = t["unitary"]
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise ConfigError("preparation.unitary", "expected a square matrix (list of rows)")
        mat = np.array(
            [[_complex(x, f"preparation.unitary[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(rows)]
        )
        dims = t["factor_dims"]
        if not isinstance(dims, list) or not all(isinstance(d, int) and d >= 1 for d in dims):
            raise ConfigError("preparation.factor_dims", "expected a list of positive integers")
        if len(dims) < 2 or dims[0] != 2 or dims[1] != 2:
            raise ConfigError("preparation.factor_dims", "factors must start with beams A and B (dimension 2 each)")
        try:
            unitary = Operator(mat, tuple(dims))
        except Exception as exc:
            raise ConfigError("preparation.unitary", str(exc)) from None
        ancilla = parse_ket(t["ancilla"], "preparation.ancilla")
        if ancilla.dim * 2 != unitary.dim:
            raise ConfigError("preparation.ancilla", f"dimension {ancilla.dim} does not fill factors {dims[1:]}")
        ancilla = Ket(ancilla.amp, tuple(dims[1:]))
        return PreparationConfig(net, unitary=unitary, ancilla=ancilla)
    return PreparationConfig(net)


def _conditioning(t: dict) -> ConditioningConfig:
    _check_keys(t, {"flag"}, "conditioning")
    if "flag" not in t or t["flag"] == "none":
        return ConditioningConfig()
    if t["flag"] == "discard":
        return ConditioningConfig(discard=True)
    return ConditioningConfig(flag=_int(t["flag"], "conditioning.flag", 0))


def _angles(t: dict) -> ChshAngles:
    _check_keys(t, {"theta", "theta_prime", "phi", "phi_prime"}, "angles")
    vals = []
    for key in ("theta", "theta_prime", "phi", "phi_prime"):
        if key not in t:
            raise ConfigError(f"angles.{key}", "required (with unit, e.g. '22.5 deg')")
        vals.append(parse_angle(t[key], f"angles.{key}"))
    return ChshAngles(*vals)


def _statistics(t: dict) -> StatisticsConfig:
    _check_keys(t, {"mode", "shots"}, "statistics")
    mode = _choice(t.get("mode", "analytic"), "statistics.mode", ("analytic", "shots"))
    if mode == "shots":
        if "shots" not in t:
            raise ConfigError("statistics.shots", "required when mode = 'shots'")
        return StatisticsConfig(mode, _int(t["shots"], "statistics.shots", 1))
    if "shots" in t:
        raise ConfigError("statistics.shots", "only allowed when mode = 'shots'")
    return StatisticsConfig(mode)


def _solver(t: dict) -> SolverConfig:
    _check_keys(t, {"mode", "tol"}, "solver")
    mode = _choice(t.get("mode", "float"), "solver.mode", ("float", "exact"))
    tol = _float(t.get("tol", 1e-8), "solver.tol")
    if tol <= 0:
        raise ConfigError("solver.tol", "must be positive")
    return SolverConfig(mode, tol)


def _output(t: dict) -> OutputConfig:
    _check_keys(t, {"model", "report", "csv"}, "output")
    for k, v in t.items():
        if not isinstance(v, str):
            raise ConfigError(f"output.{k}", "expected a path string")
    return OutputConfig(t.get("model"), t.get("report"), t.get("csv"))


def config_from_dict(doc: dict) -> ExperimentConfig:
    _check_keys(
        doc, {"seed", "source", "preparation", "conditioning", "angles", "statistics", "solver", "output"}, ""
    )
    if "preparation" not in doc:
        raise ConfigError("preparation", "exactly one preparation table is required")
    if "angles" not in doc:
        raise ConfigError("angles", "required")
    seed = _int(doc.get("seed", 0), "seed", 0)
    prep = _preparation(_table(doc, "preparation"))
    cond = _conditioning(_table(doc, "conditioning"))
    if prep.network == "visibility_preset":
        if "source" in doc:
            raise ConfigError("source", "not used by visibility_preset; remove it")
        if cond.flag is not None or cond.discard:
            raise ConfigError("conditioning.flag", "visibility_preset has no flag system")
    n_factors = {"hadamard_cnot": 2, "parity_flag": 3, "visibility_preset": 2}.get(
        prep.network, len(prep.unitary.factor_dims) if prep.unitary is not None else 2
    )
    if n_factors == 3 and cond.flag is None and not cond.discard:
        raise ConfigError("conditioning.flag", "network has a flag factor; choose a flag index or 'discard'")
    if n_factors == 2 and (cond.flag is not None or cond.discard):
        raise ConfigError("conditioning.flag", "network has no flag factor")
    if n_factors not in (2, 3):
        raise ConfigError("preparation.factor_dims", "network must act on A (x) B or A (x) B (x) E")
    return ExperimentConfig(
        seed=seed,
        source=_source(_table(doc, "source")),
        preparation=prep,
        conditioning=cond,
        angles=_angles(_table(doc, "angles")),
        statistics=_statistics(_table(doc, "statistics")),
        solver=_solver(_table(doc, "solver")),
        output=_output(_table(doc, "output")),
    )


def loads_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", str(exc)) from None
    return config_from_dict(doc)


def load_config(path: str | Path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())
