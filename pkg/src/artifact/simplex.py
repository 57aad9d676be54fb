"""Phase-one simplex for feasibility of {x >= 0 : A x = b}.

Dense tableau, Bland's rule. The same code runs in IEEE floats (``numpy``
float arrays, tolerance-gated) or exactly over ``Fraction`` (object arrays,
zero tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass
class Phase1Result:
    feasible: bool
    x: np.ndarray  # basic solution of the final tableau (original variables)
    farkas: np.ndarray  # y with A^T y <= 0 and b^T y > 0 when infeasible
    objective: object  # phase-one optimum: sum of artificials
    iterations: int


def phase_one(
    a: np.ndarray,
    b: np.ndarray,
    exact: bool = False,
    tol: float = 1e-8,
    pivot_tol: float = 1e-11,
    max_iter: int = 100_000,
) -> Phase1Result:
    """Minimise the sum of artificials; feasible iff the optimum is (near) zero.

    Redundant equality rows are harmless: an artificial stuck in the basis
    at level zero simply stays there.
    """
    m, n = a.shape
    if exact:
        zero, one = Fraction(0), Fraction(1)
        a = np.array([[Fraction(int(v)) if isinstance(v, np.integer) else Fraction(v) for v in row] for row in a], dtype=object).reshape(m, n)
        b = np.array([Fraction(v) for v in b], dtype=object)
        ptol = rtol = zero
    else:
        zero, one = 0.0, 1.0
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        ptol, rtol = pivot_tol, pivot_tol
    dtype = object if exact else float

    sign = np.array([-1 if v < 0 else 1 for v in b])
    t = np.empty((m, n + m + 1), dtype=dtype)
    t[:, :n] = a * sign[:, None]
    t[:, n : n + m] = zero
    for i in range(m):
        t[i, n + i] = one
    t[:, -1] = b * sign
    basis = list(range(n, n + m))
    # reduced costs for the phase-one objective (cost 1 on artificials)
    d = np.empty(n + m + 1, dtype=dtype)
    d[:] = zero
    d[:n] = -t[:, :n].sum(axis=0)
    d[-1] = -t[:, -1].sum()  # minus the objective value

    it = 0
    while it < max_iter:
        entering = next((j for j in range(n) if d[j] < -rtol), None)
        if entering is None:
            break
        col = t[:, entering]
        best = None
        for i in range(m):
            if col[i] > ptol:
                ratio = t[i, -1] / col[i]
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:  # unbounded direction; cannot happen for phase one
            break
        r = best[1]
        t[r, :] = t[r, :] / t[r, entering]
        f = t[:, entering].copy()
        f[r] = zero
        t = t - np.outer(f, t[r, :])
        d = d - d[entering] * t[r, :]
        if not exact:
            t[np.abs(t) < 1e-15] = 0.0
        basis[r] = entering
        it += 1

    objective = -d[-1]
    x = np.empty(n, dtype=dtype)
    x[:] = zero
    for i, j in enumerate(basis):
        if j < n:
            x[j] = t[i, -1]
    # y* = c_B B^-1 read off the artificial columns: d_art = 1 - y*
    y = (one - d[n : n + m]) * sign
    feasible = objective == zero if exact else objective <= tol
    return Phase1Result(bool(feasible), x, y, objective, it)
