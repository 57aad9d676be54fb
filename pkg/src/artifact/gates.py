"""Ideal two-beam gates, polarization projectors and dichotomic observables.

All angles are radians.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch
from .linalg import DensityOperator, Operator, Ket, tensor, identity

SIGMA_Z = Operator(np.diag([1.0, -1.0]))
SIGMA_X = Operator(np.array([[0.0, 1.0], [1.0, 0.0]]))


def hadamard() -> Operator:
    return Operator(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0))


def cnot() -> Operator:
    """CNOT on A (x) B with A as control: |x>|y> -> |x>|y xor x>."""
    m = np.zeros((4, 4))
    for x in (0, 1):
        for y in (0, 1):
            m[2 * x + (y ^ x), 2 * x + y] = 1.0
    return Operator(m, (2, 2))


def analyzer_ket(theta: float, sign: int = +1) -> Ket:
    """|+_theta> = cos(theta)|0> + sin(theta)|1>, |-_theta> its orthogonal partner."""
    c, s = math.cos(theta), math.sin(theta)
    if sign > 0:
        return Ket(np.array([c, s]))
    return Ket(np.array([-s, c]))


def projector(theta: float, sign: int = +1) -> Operator:
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return analyzer_ket(theta, sign).projector()


def sigma_theta(theta: float) -> Operator:
    """Dichotomic polarization observable, cos(2t) sigma_z + sin(2t) sigma_x."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return Operator(np.array([[c, s], [s, -c]]))


def bell_unitary() -> Operator:
    """CNOT . (H (x) I), the ideal Bell preparation network on A (x) B."""
    return cnot() @ tensor(hadamard(), identity(2))


def prepare_bell(rho_in: DensityOperator) -> DensityOperator:
    if rho_in.factor_dims != (2, 2):
        raise DimensionMismatch(f"prepare_bell needs factor_dims (2, 2), got {rho_in.factor_dims}")
    u = bell_unitary()
    return DensityOperator(u @ rho_in.op @ u.dag())


def phi_plus() -> Ket:
    return Ket(np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0), (2, 2))
