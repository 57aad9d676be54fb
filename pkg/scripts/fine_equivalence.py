"""Compare the LP verdict with the 8-member CHSH family on random models.

Models come from four families: mixtures of deterministic global
assignments (local by construction), visibility-scaled Bell states at
random angles, noisy PR boxes, and PR boxes blended with random local
models. Prints agreement counts per family and in each solver mode.
"""

from __future__ import annotations

import argparse
import itertools
import math
from collections import Counter

import numpy as np

from artifact.measure import ChshAngles
from artifact.model import PM, EmpiricalModel, chsh_scenario
from artifact.process import bell_like_with_visibility
from artifact.sheaf import chsh_family_value, global_section, induce_model

SC = chsh_scenario()
GLOBALS = list(itertools.product(PM, repeat=4))
POS = {x: i for i, x in enumerate(SC.settings)}


def from_global(weights) -> EmpiricalModel:
    tables = {c: {s: 0.0 for s in SC.assignments(c)} for c in SC.contexts}
    for g, w in zip(GLOBALS, weights):
        for c in SC.contexts:
            tables[c][tuple(g[POS[x]] for x in c)] += w
    return EmpiricalModel(SC, tables)


def pr_box(weight: float) -> EmpiricalModel:
    tables = {}
    for c in SC.contexts:
        anti = c == ("a'", "b'")
        tables[c] = {(o, o2): weight * ((o == o2) != anti) / 2 + (1 - weight) / 4 for o, o2 in SC.assignments(c)}
    return EmpiricalModel(SC, tables)


def draw(family: str, g: np.random.Generator) -> EmpiricalModel:
    if family == "local":
        w = np.zeros(16)
        k = int(g.integers(1, 17))
        w[g.choice(16, k, replace=False)] = g.dirichlet(np.ones(k))
        return from_global(w)
    if family == "bell":
        return induce_model(bell_like_with_visibility(float(g.uniform(0, 1))), ChshAngles(*g.uniform(-math.pi, math.pi, 4)))
    if family == "pr":
        return pr_box(float(g.uniform(0, 1)))
    w = float(g.uniform(0, 1))
    local, box = draw("local", g), pr_box(1.0)
    tables = {c: {s: w * box.tables[c][s] + (1 - w) * local.tables[c][s] for s in box.tables[c]} for c in SC.contexts}
    return EmpiricalModel(SC, tables)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("-n", type=int, default=2000, help="models per solver mode")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--exact", action="store_true", help="also run the exact-rational solver")
    args = parser.parse_args()

    g = np.random.default_rng(args.seed)
    families = ("local", "bell", "pr", "blend")
    modes = ("float", "exact") if args.exact else ("float",)
    agree, total, feasible = Counter(), Counter(), Counter()
    for k in range(args.n):
        family = families[k % len(families)]
        model = draw(family, g)
        s, _ = chsh_family_value(model)
        oracle = float(s) <= 2 + 1e-8
        for mode in modes:
            res = global_section(model, mode=mode)
            agree[family, mode] += res.feasible == oracle
            total[family, mode] += 1
            feasible[family, mode] += res.feasible
    print(f"{'family':>8} {'mode':>6} {'agree':>12} {'feasible':>9}")
    for family, mode in sorted(total):
        print(f"{family:>8} {mode:>6} {agree[family, mode]:>5}/{total[family, mode]:<6} {feasible[family, mode]:>9}")
    for mode in modes:
        a = sum(agree[f, mode] for f in families)
        t = sum(total[f, mode] for f in families)
        print(f"overall {mode}: {a}/{t} ({a / t:.2%})")


if __name__ == "__main__":
    main()
