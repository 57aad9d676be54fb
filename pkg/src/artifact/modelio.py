"""Text interchange format for empirical models.

Example::

    empirical-model 1
    provenance sampled shots=1000 seed=7
    setting a +1 -1
    setting b +1 -1
    context a b
    +1 +1 1/2
    +1 -1 0
    -1 +1 0
    -1 -1 1/2
    end

Blank lines and ``#`` comments are ignored. Probabilities are written as
exact rationals (``p/q``); on input, decimals such as ``0.125`` are also
accepted and read exactly. Floats are written as the exact binary
fraction they hold, so a float table also survives a round trip.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from pathlib import Path

from .errors import ParseError
from .model import EmpiricalModel, Provenance, Scenario

HEADER = "empirical-model"
VERSION = "1"
NEGATIVE_FLOOR = Fraction(-1, 10**12)


def format_outcome(o) -> str:
    if isinstance(o, bool):
        raise TypeError("boolean outcomes are not supported")
    if isinstance(o, int):
        return f"{o:+d}"
    text = str(o)
    if not text or any(ch.isspace() for ch in text) or text.startswith("#"):
        raise ValueError(f"outcome label {text!r} cannot be written")
    return text


def parse_outcome(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def format_prob(p) -> str:
    f = Fraction(p)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def dumps(model: EmpiricalModel) -> str:
    sc = model.scenario
    prov = model.provenance
    lines = [f"{HEADER} {VERSION}"]
    if prov.kind == "sampled":
        lines.append(f"provenance sampled shots={prov.shots} seed={prov.seed}")
    else:
        lines.append("provenance analytic")
    for x in sc.settings:
        lines.append(" ".join(["setting", x] + [format_outcome(o) for o in sc.outcomes[x]]))
    for c in sc.contexts:
        lines.append(" ".join(["context", *c]))
        for s, p in model.tables[c].items():
            lines.append(" ".join([format_outcome(o) for o in s] + [format_prob(p)]))
        lines.append("end")
    return "\n".join(lines) + "\n"


def _tokens(line: str) -> list[tuple[str, int]]:
    out = []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < len(line) and not line[j].isspace():
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _prob(tok: str, lineno: int, col: int) -> Fraction:
    try:
        p = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad probability {tok!r}", lineno, col) from None
    # same floor as EmpiricalModel: analytic tables carry rounding-level negatives
    if p < NEGATIVE_FLOOR:
        raise ParseError(f"negative probability {tok!r}", lineno, col)
    return p


def _provenance(toks, lineno: int) -> Provenance:
    if len(toks) < 2:
        raise ParseError("provenance needs a kind", lineno, toks[0][1])
    kind, col = toks[1]
    fields = {}
    for tok, c in toks[2:]:
        key, eq, val = tok.partition("=")
        if not eq or key not in ("shots", "seed") or key in fields:
            raise ParseError(f"unexpected provenance field {tok!r}", lineno, c)
        try:
            fields[key] = int(val)
        except ValueError:
            raise ParseError(f"{key} must be an integer, got {val!r}", lineno, c + len(key) + 1) from None
    try:
        return Provenance(kind, fields.get("shots"), fields.get("seed"))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, col) from None


def loads(text: str) -> EmpiricalModel:
    settings: list[str] = []
    outcomes: dict[str, tuple] = {}
    contexts: list[tuple[str, ...]] = []
    tables: dict[tuple[str, ...], dict] = {}
    context_line: dict[tuple[str, ...], int] = {}
    provenance = None
    seen_header = False
    current = None
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        word, col = toks[0]
        if not seen_header:
            if word != HEADER or len(toks) != 2:
                raise ParseError(f"expected header '{HEADER} {VERSION}'", lineno, col)
            if toks[1][0] != VERSION:
                raise ParseError(f"unsupported version {toks[1][0]!r}", lineno, toks[1][1])
            seen_header = True
            continue
        if current is not None:
            if word == "end" and len(toks) == 1:
                ctx, rows = current
                missing = [s for s in _cells(ctx, outcomes) if s not in rows]
                if missing:
                    raise ParseError(f"context {' '.join(ctx)} lacks cells {missing}", lineno, col)
                tables[ctx] = rows
                current = None
                continue
            ctx, rows = current
            if len(toks) != len(ctx) + 1:
                raise ParseError(f"expected {len(ctx)} outcomes and a probability", lineno, col)
            cell = []
            for (tok, c), x in zip(toks[:-1], ctx):
                o = parse_outcome(tok)
                if o not in outcomes[x]:
                    raise ParseError(f"{tok!r} is not an outcome of setting {x!r}", lineno, c)
                cell.append(o)
            cell = tuple(cell)
            if cell in rows:
                raise ParseError(f"duplicate cell {' '.join(t for t, _ in toks[:-1])}", lineno, col)
            rows[cell] = _prob(toks[-1][0], lineno, toks[-1][1])
            continue
        if word == "provenance":
            if provenance is not None:
                raise ParseError("duplicate provenance line", lineno, col)
            provenance = _provenance(toks, lineno)
        elif word == "setting":
            if contexts:
                raise ParseError("settings must precede contexts", lineno, col)
            if len(toks) < 3:
                raise ParseError("setting needs a label and at least one outcome", lineno, col)
            label = toks[1][0]
            if label in outcomes:
                raise ParseError(f"duplicate setting {label!r}", lineno, toks[1][1])
            alphabet = tuple(parse_outcome(t) for t, _ in toks[2:])
            if len(set(alphabet)) != len(alphabet):
                raise ParseError(f"repeated outcome for setting {label!r}", lineno, toks[2][1])
            settings.append(label)
            outcomes[label] = alphabet
        elif word == "context":
            ctx = tuple(t for t, _ in toks[1:])
            if not ctx:
                raise ParseError("empty context", lineno, col)
            for t, c in toks[1:]:
                if t not in outcomes:
                    raise ParseError(f"unknown setting {t!r}", lineno, c)
            if len(set(ctx)) != len(ctx):
                raise ParseError("context repeats a setting", lineno, col)
            if any(set(ctx) == set(c) for c in contexts):
                raise ParseError("duplicate context", lineno, col)
            contexts.append(ctx)
            context_line[ctx] = lineno
            current = (ctx, {})
        else:
            raise ParseError(f"unexpected keyword {word!r}", lineno, col)
    if not seen_header:
        raise ParseError("empty document", max(lineno, 1))
    if current is not None:
        raise ParseError(f"context {' '.join(current[0])} is not closed with 'end'", lineno + 1)
    if not contexts:
        raise ParseError("no contexts", lineno + 1)
    try:
        sc = Scenario(tuple(settings), tuple(contexts), outcomes)
    except ValueError as exc:
        raise ParseError(str(exc), lineno + 1) from None
    ordered = {}
    for ctx, rows in tables.items():
        key = sc.order(ctx)
        pos = [ctx.index(x) for x in key]
        ordered[key] = {tuple(s[i] for i in pos): p for s, p in rows.items()}
    try:
        return EmpiricalModel(sc, ordered, provenance or Provenance())
    except ValueError as exc:
        bad = next((c for c in contexts if str(sc.order(c)) in str(exc)), contexts[0])
        raise ParseError(str(exc), context_line[bad]) from None


def _cells(ctx, outcomes):
    return list(itertools.product(*(outcomes[x] for x in ctx)))


def read(path: str | Path) -> EmpiricalModel:
    return loads(Path(path).read_text())


def write(model: EmpiricalModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model))
