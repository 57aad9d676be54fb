"""Measurement scenarios and empirical models.

A context table maps each assignment (a tuple of outcomes, aligned with the
context's settings in scenario order) to its probability. Probabilities are
either ``Fraction`` (exact) or ``float``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import NotSubset, UnknownContext

Number = Union[Fraction, float]
Outcome = Hashable
Context = tuple[str, ...]
Assignment = tuple[Outcome, ...]
Table = dict[Assignment, Number]

PM = (+1, -1)


@dataclass(frozen=True)
class Scenario:
    settings: tuple[str, ...]
    contexts: tuple[Context, ...]
    outcomes: Mapping[str, tuple[Outcome, ...]]

    def __post_init__(self) -> None:
        settings = tuple(self.settings)
        if len(set(settings)) != len(settings):
            raise ValueError("setting labels must be distinct")
        order = {x: i for i, x in enumerate(settings)}
        contexts = []
        for c in self.contexts:
            if not c:
                raise ValueError("contexts must be nonempty")
            unknown = [x for x in c if x not in order]
            if unknown:
                raise ValueError(f"context {c} uses unknown settings {unknown}")
            if len(set(c)) != len(c):
                raise ValueError(f"context {c} repeats a setting")
            contexts.append(tuple(sorted(c, key=order.__getitem__)))
        if len(set(contexts)) != len(contexts):
            raise ValueError("contexts must be distinct")
        covered = {x for c in contexts for x in c}
        missing = [x for x in settings if x not in covered]
        if missing:
            raise ValueError(f"settings {missing} appear in no context")
        outcomes = {x: tuple(self.outcomes[x]) for x in settings}
        for x, alphabet in outcomes.items():
            if not alphabet or len(set(alphabet)) != len(alphabet):
                raise ValueError(f"outcome alphabet of {x!r} must be nonempty and distinct")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "contexts", tuple(contexts))
        object.__setattr__(self, "outcomes", outcomes)

    def order(self, subset: Iterable[str]) -> Context:
        idx = {x: i for i, x in enumerate(self.settings)}
        return tuple(sorted(subset, key=idx.__getitem__))

    def assignments(self, subset: Sequence[str]) -> list[Assignment]:
        """All assignments over ``subset`` in canonical (lexicographic) order."""
        return list(itertools.product(*(self.outcomes[x] for x in subset)))

    def n_global(self) -> int:
        n = 1
        for x in self.settings:
            n *= len(self.outcomes[x])
        return n


def chsh_scenario() -> Scenario:
    """Settings a, a' (first party) and b, b' (second party), outcomes +-1."""
    return Scenario(
        settings=("a", "a'", "b", "b'"),
        contexts=(("a", "b"), ("a", "b'"), ("a'", "b"), ("a'", "b'")),
        outcomes={x: PM for x in ("a", "a'", "b", "b'")},
    )


@dataclass(frozen=True)
class Provenance:
    kind: str = "analytic"  # "analytic" | "sampled"
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("analytic", "sampled"):
            raise ValueError(f"unknown provenance {self.kind!r}")
        if self.kind == "sampled" and (self.shots is None or self.shots < 1):
            raise ValueError("sampled provenance needs a positive shot count")


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    scenario: Scenario
    tables: Mapping[Context, Table]
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self) -> None:
        sc = self.scenario
        tables: dict[Context, Table] = {}
        given = {sc.order(c): t for c, t in self.tables.items()}
        if set(given) != set(sc.contexts):
            raise ValueError(f"tables given for {sorted(given)} but scenario has {list(sc.contexts)}")
        for c in sc.contexts:
            t = given[c]
            cells = sc.assignments(c)
            extra = set(t) - set(cells)
            if extra:
                raise ValueError(f"context {c}: unknown assignments {sorted(map(str, extra))}")
            table = {s: t.get(s, Fraction(0)) for s in cells}
            low = min(float(v) for v in table.values())
            if low < -1e-12:
                raise ValueError(f"context {c}: negative probability {low:.3e}")
            total = sum(table.values())
            if abs(float(total) - 1.0) > 1e-9:
                raise ValueError(f"context {c}: probabilities sum to {float(total)!r}")
            tables[c] = table
        object.__setattr__(self, "tables", tables)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmpiricalModel):
            return NotImplemented
        return (
            self.scenario == other.scenario
            and self.provenance == other.provenance
            and all(self.tables[c] == other.tables[c] for c in self.scenario.contexts)
        )

    def table(self, context: Iterable[str]) -> Table:
        c = self.scenario.order(context)
        if c not in self.tables:
            raise UnknownContext(f"{c} is not a context of this scenario")
        return self.tables[c]

    def is_rational(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for t in self.tables.values() for v in t.values())

    def as_float(self) -> EmpiricalModel:
        tables = {c: {s: float(v) for s, v in t.items()} for c, t in self.tables.items()}
        return EmpiricalModel(self.scenario, tables, self.provenance)


def restrict(assignment: Mapping[str, Outcome], to: Iterable[str]) -> dict[str, Outcome]:
    """Forget every component not in ``to``."""
    to = list(to)
    missing = [x for x in to if x not in assignment]
    if missing:
        raise NotSubset(f"{missing} not in the assignment's domain {list(assignment)}")
    return {x: assignment[x] for x in to}


def marginalize(model: EmpiricalModel, context: Iterable[str], to: Iterable[str]) -> Table:
    sc = model.scenario
    table = model.table(context)
    c = sc.order(context)
    sub = sc.order(to)
    if not set(sub) <= set(c):
        raise NotSubset(f"{sub} is not a subset of context {c}")
    pos = [c.index(x) for x in sub]
    out: Table = {s: Fraction(0) for s in sc.assignments(sub)}
    for s, p in table.items():
        key = tuple(s[i] for i in pos)
        out[key] = out[key] + p
    return out


@dataclass(frozen=True)
class OverlapDeviation:
    first: Context
    second: Context
    overlap: Context
    max_deviation: float


@dataclass(frozen=True)
class CompatibilityReport:
    passed: bool
    tol: float
    max_deviation: float
    overlaps: tuple[OverlapDeviation, ...]


def check_compatibility(model: EmpiricalModel, tol: float = 1e-10) -> CompatibilityReport:
    sc = model.scenario
    rows = []
    for c1, c2 in itertools.combinations(sc.contexts, 2):
        inter = sc.order(set(c1) & set(c2))
        m1 = marginalize(model, c1, inter)
        m2 = marginalize(model, c2, inter)
        dev = max(abs(float(m1[s] - m2[s])) for s in m1)
        rows.append(OverlapDeviation(c1, c2, inter, dev))
    worst = max((r.max_deviation for r in rows), default=0.0)
    return CompatibilityReport(worst <= tol, tol, worst, tuple(rows))


def table_array(table: Table) -> np.ndarray:
    return np.array([float(v) for v in table.values()])
