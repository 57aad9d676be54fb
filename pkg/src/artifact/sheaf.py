"""Global-section (noncontextuality) decision for empirical models.

A model admits a global section iff the linear system

    q(s) >= 0 for every global assignment s in O^X,
    sum_s q(s) = 1,
    sum_{s : s|C = t} q(s) = p_C(t) for every context C and cell t,

is feasible. Feasibility is decided by the phase-one simplex in
:mod:`artifact.simplex`. Both verdicts come with evidence that is checked
after the solve: a witness distribution whose marginals are recomputed, or a
linear inequality whose classical bound is recomputed by enumerating every
deterministic global assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import IncompatibleModel, TooLarge, WrongScenario
from .linalg import DensityOperator
from .measure import ChshAngles, model_from_arrays, outcome_probs
from .model import (
    Assignment,
    Context,
    EmpiricalModel,
    Number,
    Scenario,
    check_compatibility,
    chsh_scenario,
    marginalize,
    restrict,
)
from .simplex import phase_one

__all__ = [
    "Certificate",
    "ChshVariant",
    "SectionResult",
    "Scenario",
    "EmpiricalModel",
    "chsh_scenario",
    "restrict",
    "marginalize",
    "check_compatibility",
    "chsh_family_value",
    "global_section",
    "induce_model",
    "no_signalling_projection",
    "rationalize",
    "mix_with_uniform",
    "uniform_admixture",
]

MAX_GLOBAL = 10**6
FLOAT_TOL = 1e-8
ROUNDING_GRID = 10**12


@dataclass(frozen=True)
class ChshVariant:
    """Which context carries the minus sign, and the overall sign."""

    minus_context: Context
    sign: int

    def __str__(self) -> str:
        return f"{'+' if self.sign > 0 else '-'}(sum E - 2 E{list(self.minus_context)})"


@dataclass(frozen=True)
class Certificate:
    """Linear functional f(p) = sum coefficients[(C, t)] p_C(t).

    Every model with a global section satisfies f <= ``bound``; the
    certified model has f = ``value`` > ``bound``.
    """

    kind: str  # "chsh" | "farkas"
    coefficients: Mapping[tuple[Context, Assignment], Number]
    bound: Number
    value: Number
    variant: ChshVariant | None = None

    @property
    def violation(self) -> float:
        return float(self.value - self.bound)

    def describe(self) -> str:
        if self.kind == "chsh":
            return f"CHSH variant {self.variant}: value {float(self.value):.12g} > bound {float(self.bound):g}"
        return f"Farkas functional over {len(self.coefficients)} cells: value {float(self.value):.12g} > bound {float(self.bound):.12g}"


@dataclass(frozen=True)
class SectionResult:
    verdict: str  # "feasible" | "infeasible"
    mode: str  # "float" | "exact"
    witness: Mapping[Assignment, Number] | None
    certificate: Certificate | None
    iterations: int
    max_residual: float
    rounding_radius: float = 0.0
    tol: float = FLOAT_TOL

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"


# -- CHSH-shaped scenarios ---------------------------------------------------


def _pm_value(alphabet: tuple, outcome) -> int:
    if set(alphabet) == {1, -1}:
        return int(outcome)
    return +1 if outcome == alphabet[0] else -1


def chsh_contexts(sc: Scenario) -> tuple[Context, Context, Context, Context]:
    """Contexts (a0 b0, a0 b1, a1 b0, a1 b1) of a CHSH-shaped scenario."""
    if len(sc.settings) != 4 or len(sc.contexts) != 4 or any(len(c) != 2 for c in sc.contexts):
        raise WrongScenario("CHSH needs 4 settings and 4 two-setting contexts")
    if any(len(sc.outcomes[x]) != 2 for x in sc.settings):
        raise WrongScenario("CHSH needs binary outcomes")
    a0 = sc.settings[0]
    side_b = [y for c in sc.contexts if a0 in c for y in c if y != a0]
    side_a = [x for x in sc.settings if x not in side_b]
    if len(side_b) != 2 or len(side_a) != 2:
        raise WrongScenario("contexts do not form a two-party cycle")
    a0, a1 = side_a
    b0, b1 = side_b
    want = [sc.order(p) for p in ((a0, b0), (a0, b1), (a1, b0), (a1, b1))]
    if set(want) != set(sc.contexts):
        raise WrongScenario("contexts do not form a two-party cycle")
    return tuple(want)


def context_correlation(model: EmpiricalModel, context: Context) -> Number:
    sc = model.scenario
    x, y = context
    return sum(
        p * _pm_value(sc.outcomes[x], s[0]) * _pm_value(sc.outcomes[y], s[1])
        for s, p in model.table(context).items()
    )


def _chsh_functional(model: EmpiricalModel, variant: ChshVariant) -> dict:
    sc = model.scenario
    coeffs = {}
    for c in chsh_contexts(sc):
        w = variant.sign * (-1 if c == variant.minus_context else 1)
        x, y = c
        for s in sc.assignments(c):
            coeffs[(c, s)] = w * _pm_value(sc.outcomes[x], s[0]) * _pm_value(sc.outcomes[y], s[1])
    return coeffs


def chsh_family_value(model: EmpiricalModel) -> tuple[Number, ChshVariant]:
    """Largest value over the 8 sign placements of the CHSH expression."""
    contexts = chsh_contexts(model.scenario)
    e = [context_correlation(model, c) for c in contexts]
    total = sum(e)
    best = None
    for k, c in enumerate(contexts):
        for sign in (+1, -1):
            v = sign * (total - 2 * e[k])
            if best is None or v > best[0]:
                best = (v, ChshVariant(c, sign))
    return best


# -- correlator coordinates for binary scenarios -----------------------------


def _is_binary(sc: Scenario) -> bool:
    return all(len(sc.outcomes[x]) == 2 for x in sc.settings)


def _correlators(model: EmpiricalModel, context: Context) -> dict[tuple[str, ...], Number]:
    sc = model.scenario
    table = model.table(context)
    out = {}
    for r in range(1, len(context) + 1):
        for sub in itertools.combinations(range(len(context)), r):
            key = tuple(context[i] for i in sub)
            total = 0
            for s, p in table.items():
                sgn = 1
                for i in sub:
                    sgn *= _pm_value(sc.outcomes[context[i]], s[i])
                total = total + sgn * p
            out[key] = total
    return out


def _from_correlators(sc: Scenario, context: Context, corr: Mapping[tuple[str, ...], Number], one) -> dict:
    k = len(context)
    table = {}
    for s in sc.assignments(context):
        v = one
        for r in range(1, k + 1):
            for sub in itertools.combinations(range(k), r):
                sgn = 1
                for i in sub:
                    sgn *= _pm_value(sc.outcomes[context[i]], s[i])
                v = v + sgn * corr[tuple(context[i] for i in sub)]
        table[s] = v / 2**k
    return table


def no_signalling_projection(model: EmpiricalModel, grid: int | None = None) -> tuple[EmpiricalModel, float]:
    """Nearest compatible model in correlator coordinates (binary outcomes).

    Each correlator over a set of settings is averaged across every context
    that contains the set, then tables are rebuilt; with ``grid`` the
    averaged correlators are first rounded to multiples of ``1/grid`` and
    the result is exact-rational. If rebuilt cells fall below zero (noisy
    tables whose true value is 0), the smallest uniform admixture that
    fixes them is applied; see :func:`uniform_admixture`. A compatible
    rational model is returned unchanged. Returns the new model and the
    largest per-cell change.
    """
    sc = model.scenario
    if not _is_binary(sc):
        raise WrongScenario("correlator projection needs binary outcome alphabets")
    per_context = {c: _correlators(model, c) for c in sc.contexts}
    pooled: dict[tuple[str, ...], list] = {}
    for corr in per_context.values():
        for key, v in corr.items():
            pooled.setdefault(key, []).append(v)
    exact = grid is not None or model.is_rational()
    avg = {}
    for key, vals in pooled.items():
        if grid is not None:
            mean = sum(float(v) for v in vals) / len(vals)
            avg[key] = Fraction(round(mean * grid), grid)
        elif exact:
            avg[key] = sum(vals, Fraction(0)) / len(vals)
        else:
            avg[key] = math.fsum(vals) / len(vals)
    one = Fraction(1) if exact else 1.0
    tables = {c: _from_correlators(sc, c, avg, one) for c in sc.contexts}
    # noisy tables can land just outside the simplex on cells that should be 0
    weight = _uniform_weight(tables, exact)
    # an exact LP must never see a negative cell; floats tolerate rounding noise
    if weight > 0 if exact else weight > 1e-12:
        tables = _mix_tables(tables, weight)
    radius = max(
        abs(float(tables[c][s]) - float(model.tables[c][s])) for c in sc.contexts for s in tables[c]
    )
    return EmpiricalModel(sc, tables, model.provenance), radius


def _uniform_weight(tables: Mapping[Context, Mapping], exact: bool) -> Number:
    weight = Fraction(0) if exact else 0.0
    for t in tables.values():
        u = 1 / Fraction(len(t)) if exact else 1.0 / len(t)
        for p in t.values():
            if p < 0:
                weight = max(weight, -p / (u - p))
    return weight


def _mix_tables(tables: Mapping[Context, Mapping], weight: Number) -> dict:
    out = {}
    for c, t in tables.items():
        u = 1 / Fraction(len(t)) if isinstance(weight, Fraction) else 1.0 / len(t)
        out[c] = {s: (1 - weight) * p + weight * u for s, p in t.items()}
    return out


def mix_with_uniform(model: EmpiricalModel, weight: Number) -> EmpiricalModel:
    """(1 - weight) * model + weight * uniform; the uniform model is noncontextual."""
    return EmpiricalModel(model.scenario, _mix_tables(model.tables, weight), model.provenance)


def uniform_admixture(model: EmpiricalModel) -> tuple[EmpiricalModel, Number]:
    """Smallest uniform admixture that lifts every cell to >= 0.

    Mixing toward the uniform model keeps compatibility and can only remove
    contextuality, never create it.
    """
    weight = _uniform_weight(model.tables, model.is_rational())
    if weight == 0:
        return model, weight
    return mix_with_uniform(model, weight), weight


def rationalize(model: EmpiricalModel, grid: int = ROUNDING_GRID) -> tuple[EmpiricalModel, float]:
    """Exact-rational stand-in for a float model, with its rounding radius.

    Exactly compatible, nonnegative rational models pass through untouched;
    other rational binary models (e.g. floats written out as binary
    fractions) are averaged exactly in correlator coordinates, and any
    remaining negative cells are lifted by a uniform admixture. Float
    binary models are rounded in correlator coordinates so the result stays
    exactly compatible; other scenarios round each cell to the grid and
    absorb the normalisation error in the largest cell.
    """
    sc = model.scenario
    if model.is_rational():
        nonnegative = all(p >= 0 for t in model.tables.values() for p in t.values())
        if nonnegative and check_compatibility(model, tol=0.0).passed:
            return model, 0.0
        if _is_binary(sc):
            return no_signalling_projection(model)
        lifted, _ = uniform_admixture(model)
        radius = max(abs(float(lifted.tables[c][s] - model.tables[c][s])) for c in sc.contexts for s in model.tables[c])
        return lifted, radius
    if _is_binary(sc):
        return no_signalling_projection(model, grid)
    tables = {}
    for c in sc.contexts:
        t = {s: Fraction(round(float(p) * grid), grid) for s, p in model.tables[c].items()}
        top = max(t, key=t.__getitem__)
        t[top] += 1 - sum(t.values())
        tables[c] = t
    out = EmpiricalModel(sc, tables, model.provenance)
    radius = max(abs(float(tables[c][s]) - float(model.tables[c][s])) for c in sc.contexts for s in tables[c])
    return out, radius


# -- the LP -------------------------------------------------------------------


def _constraint_system(model: EmpiricalModel, exact: bool):
    sc = model.scenario
    globals_ = sc.assignments(sc.settings)
    pos = {x: i for i, x in enumerate(sc.settings)}
    rows: list[tuple[Context, Assignment] | None] = [None]
    index = {}
    for c in sc.contexts:
        for s in sc.assignments(c):
            index[(c, s)] = len(rows)
            rows.append((c, s))
    a = np.zeros((len(rows), len(globals_)), dtype=np.int8)
    a[0, :] = 1
    for j, g in enumerate(globals_):
        for c in sc.contexts:
            a[index[(c, tuple(g[pos[x]] for x in c))], j] = 1
    if exact:
        b = np.array([Fraction(1)] + [Fraction(model.tables[c][s]) for c, s in rows[1:]], dtype=object)
    else:
        b = np.array([1.0] + [float(model.tables[c][s]) for c, s in rows[1:]])
    return globals_, rows, a, b


def _witness_residual(model: EmpiricalModel, globals_, witness: np.ndarray, exact: bool) -> float:
    """Largest gap between a table cell and the witness marginal (exact when ``exact``)."""
    sc = model.scenario
    pos = {x: i for i, x in enumerate(sc.settings)}
    conv = Fraction if exact else float
    worst = abs(sum((conv(q) for q in witness), conv(0)) - 1)
    for c in sc.contexts:
        marg = {s: conv(0) for s in sc.assignments(c)}
        for g, q in zip(globals_, witness):
            marg[tuple(g[pos[x]] for x in c)] += conv(q)
        worst = max(worst, max(abs(marg[s] - conv(model.tables[c][s])) for s in marg))
    return float(worst)


def _evaluate(model: EmpiricalModel, coeffs: Mapping, exact: bool) -> tuple[Number, Number]:
    """Value of the functional on the model and its max over deterministic assignments."""
    sc = model.scenario
    zero = Fraction(0) if exact else 0.0
    value = sum((coeffs[(c, s)] * model.tables[c][s] for (c, s) in coeffs), zero)
    pos = {x: i for i, x in enumerate(sc.settings)}
    bound = None
    for g in sc.assignments(sc.settings):
        v = sum((coeffs.get((c, tuple(g[pos[x]] for x in c)), zero) for c in sc.contexts), zero)
        bound = v if bound is None or v > bound else bound
    return value, bound


def _certificate(model: EmpiricalModel, rows, farkas: np.ndarray, exact: bool, tol: float) -> Certificate | None:
    margin = 0 if exact else tol
    try:
        chsh_contexts(model.scenario)
        is_chsh = True
    except WrongScenario:
        is_chsh = False
    if is_chsh:
        _, variant = chsh_family_value(model)
        coeffs = _chsh_functional(model, variant)
        value, bound = _evaluate(model, coeffs, exact)
        if value - bound > margin:
            return Certificate("chsh", coeffs, bound, value, variant)
    scale = max(abs(float(v)) for v in farkas[1:])
    if scale == 0.0:
        return None
    if exact:
        coeffs = {cell: Fraction(z) for cell, z in zip(rows[1:], farkas[1:])}
    else:
        coeffs = {cell: float(z) / scale for cell, z in zip(rows[1:], farkas[1:])}
    value, bound = _evaluate(model, coeffs, exact)
    if value - bound > margin:
        return Certificate("farkas", coeffs, bound, value)
    return None


def global_section(model: EmpiricalModel, mode: str = "float", tol: float = FLOAT_TOL) -> SectionResult:
    """Decide whether ``model`` admits a global section.

    ``mode="float"`` solves in double precision with feasibility tolerance
    ``tol``. ``mode="exact"`` solves over the rationals; float tables are
    first rounded to a 1e-12 grid by :func:`rationalize` and the rounding
    radius is reported. Both modes reject models whose overlaps disagree by
    more than ``tol``.
    """
    if mode not in ("float", "exact"):
        raise ValueError(f"mode must be 'float' or 'exact', got {mode!r}")
    sc = model.scenario
    if sc.n_global() > MAX_GLOBAL:
        raise TooLarge(f"|O^X| = {sc.n_global()} exceeds {MAX_GLOBAL}")
    exact = mode == "exact"
    radius = 0.0
    solved = model
    report = check_compatibility(model, tol=tol)
    if report.passed and exact:
        solved, radius = rationalize(model)
        report = check_compatibility(solved, tol=0.0)
    if not report.passed:
        raise IncompatibleModel(
            f"marginals disagree on overlaps by up to {report.max_deviation:.3e} (tolerance {report.tol:g})"
        )

    globals_, rows, a, b = _constraint_system(solved, exact)
    res = phase_one(a, b, exact=exact, tol=tol)

    if res.feasible:
        x = res.x if exact else np.clip(res.x.astype(float), 0.0, None)
        residual = _witness_residual(solved, globals_, x, exact)
        limit = 0.0 if exact else tol
        if residual > limit:
            raise ArithmeticError(f"witness fails post-hoc verification (residual {residual:.3e})")
        witness = {g: q for g, q in zip(globals_, x) if q != 0}
        return SectionResult("feasible", mode, witness, None, res.iterations, residual, radius, tol)

    cert = _certificate(solved, rows, res.farkas, exact, tol)
    if cert is None:
        raise ArithmeticError(
            f"phase one reports infeasibility (objective {float(res.objective):.3e}) "
            f"but no separating inequality clears the {tol:g} margin"
        )
    return SectionResult("infeasible", mode, None, cert, res.iterations, float(res.objective), radius, tol)


def induce_model(rho_ab: DensityOperator, a: ChshAngles) -> EmpiricalModel:
    """CHSH empirical model of a two-beam state at the four setting pairs."""
    return model_from_arrays([outcome_probs(rho_ab, s) for s in a.pairs()])
