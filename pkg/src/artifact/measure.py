"""Outcome statistics of local two-outcome polarization measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .errors import DimensionMismatch
from .gates import projector, sigma_theta
from .linalg import DensityOperator, partial_trace, tensor
from .model import PM, EmpiricalModel, Provenance, chsh_scenario

CROSS_CHECK_TOL = 1e-12


@dataclass(frozen=True)
class SettingPair:
    alice: float
    bob: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alice) and math.isfinite(self.bob)):
            raise ValueError("setting angles must be finite")


@dataclass(frozen=True)
class ChshAngles:
    theta: float
    theta_prime: float
    phi: float
    phi_prime: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(a) for a in self.as_tuple()):
            raise ValueError("CHSH angles must be finite")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.theta, self.theta_prime, self.phi, self.phi_prime)

    def pairs(self) -> list[SettingPair]:
        """Setting pairs for contexts (a,b), (a,b'), (a',b), (a',b')."""
        return [
            SettingPair(self.theta, self.phi),
            SettingPair(self.theta, self.phi_prime),
            SettingPair(self.theta_prime, self.phi),
            SettingPair(self.theta_prime, self.phi_prime),
        ]


TSIRELSON_ANGLES = ChshAngles(0.0, math.pi / 4, math.pi / 8, -math.pi / 8)


def _require(rho: DensityOperator, dims: tuple[int, ...]) -> None:
    if rho.factor_dims != dims:
        raise DimensionMismatch(f"expected factor_dims {dims}, got {rho.factor_dims}")


def outcome_probs(rho_ab: DensityOperator, s: SettingPair) -> np.ndarray:
    """2x2 table p[i, j], index 0 for outcome +1 and 1 for -1."""
    _require(rho_ab, (2, 2))
    p = np.empty((2, 2))
    for i, o in enumerate(PM):
        for j, o2 in enumerate(PM):
            m = tensor(projector(s.alice, o), projector(s.bob, o2)).mat
            p[i, j] = float(np.real(np.trace(rho_ab.mat @ m)))
    return p


def local_probs(rho: DensityOperator, theta: float) -> tuple[float, float]:
    _require(rho, (2,))
    plus = float(np.real(np.trace(rho.mat @ projector(theta, +1).mat)))
    minus = float(np.real(np.trace(rho.mat @ projector(theta, -1).mat)))
    return plus, minus


def contrast(rho: DensityOperator, theta: float) -> float:
    """p(+|theta) - p(-|theta), cross-checked against Tr(rho sigma_theta)."""
    plus, minus = local_probs(rho, theta)
    via_probs = plus - minus
    via_op = float(np.real(np.trace(rho.mat @ sigma_theta(theta).mat)))
    if abs(via_probs - via_op) > CROSS_CHECK_TOL:
        raise ArithmeticError(f"contrast formulas disagree: {via_probs!r} vs {via_op!r}")
    return via_op


def marginal_state(rho_ab: DensityOperator, side: int) -> DensityOperator:
    _require(rho_ab, (2, 2))
    return partial_trace(rho_ab, [side])


def correlation(rho_ab: DensityOperator, s: SettingPair) -> float:
    """E(theta, phi) = Tr(rho sigma_theta (x) sigma_phi), cross-checked
    against the average product of outcomes."""
    _require(rho_ab, (2, 2))
    via_op = float(np.real(np.trace(rho_ab.mat @ tensor(sigma_theta(s.alice), sigma_theta(s.bob)).mat)))
    p = outcome_probs(rho_ab, s)
    via_probs = p[0, 0] - p[0, 1] - p[1, 0] + p[1, 1]
    if abs(via_probs - via_op) > CROSS_CHECK_TOL:
        raise ArithmeticError(f"correlation formulas disagree: {via_probs!r} vs {via_op!r}")
    return via_op


def chsh(rho_ab: DensityOperator, a: ChshAngles) -> float:
    e = [correlation(rho_ab, s) for s in a.pairs()]
    return e[0] + e[1] + e[2] - e[3]


def model_from_arrays(tables: list[np.ndarray], provenance: Provenance | None = None) -> EmpiricalModel:
    """CHSH-scenario model from four 2x2 tables in context order."""
    sc = chsh_scenario()
    data = {}
    for c, p in zip(sc.contexts, tables):
        data[c] = {(o, o2): p[i, j] for i, o in enumerate(PM) for j, o2 in enumerate(PM)}
    return EmpiricalModel(sc, data, provenance or Provenance())


def monte_carlo_model(
    rho_ab: DensityOperator, a: ChshAngles, shots_per_context: int, seed: int
) -> EmpiricalModel:
    """Finite-sample CHSH model; frequencies are exact ``Fraction`` counts/shots.

    Each context draws from its own substream of ``seed``.
    """
    if shots_per_context < 1:
        raise ValueError(f"shots must be >= 1, got {shots_per_context}")
    tables = []
    for k, s in enumerate(a.pairs()):
        p = np.clip(outcome_probs(rho_ab, s).reshape(-1), 0.0, None)
        p = p / p.sum()
        counts = rng.stream(seed, "shots", k).multinomial(shots_per_context, p)
        tables.append(np.array([Fraction(int(c), shots_per_context) for c in counts], dtype=object).reshape(2, 2))
    return model_from_arrays(tables, Provenance("sampled", shots_per_context, seed))


def chsh_standard_error(correlations: list[float], shots_per_context: int) -> float:
    """Binomial propagation: Var(E_hat) = (1 - E^2)/N per independent context."""
    return math.sqrt(sum(max(0.0, 1.0 - e * e) for e in correlations) / shots_per_context)
