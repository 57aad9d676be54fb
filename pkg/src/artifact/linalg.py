"""Dense complex linear algebra on small tensor-factorised Hilbert spaces.

Every :class:`Operator` carries the dimensions of its tensor factors, in the
fixed order in which the factors were composed, so that partial traces never
have to guess the factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidSubsystem,
    NotHermitian,
    NotPSD,
    NotUnitTrace,
)

VALIDITY_TOL = 1e-10
IDENTITY_TOL = 1e-12
KET_NORM_TOL = 1e-12


def _frozen_array(data) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entry")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix over an ordered tensor factorisation."""

    mat: np.ndarray
    factor_dims: tuple[int, ...] = ()
    # elementary factors of a tensor product, so regrouping cannot change rounding
    parts: tuple[Operator, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        mat = _frozen_array(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise DimensionMismatch(f"operator must be square and nonempty, got shape {mat.shape}")
        dims = tuple(int(d) for d in self.factor_dims) or (mat.shape[0],)
        if any(d < 1 for d in dims) or math.prod(dims) != mat.shape[0]:
            raise DimensionMismatch(f"factor_dims {dims} do not multiply to {mat.shape[0]}")
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dag(self) -> Operator:
        return Operator(self.mat.conj().T, self.factor_dims)

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def __matmul__(self, other: Operator) -> Operator:
        if other.factor_dims != self.factor_dims:
            raise DimensionMismatch(f"{self.factor_dims} @ {other.factor_dims}")
        return Operator(self.mat @ other.mat, self.factor_dims)

    def __add__(self, other: Operator) -> Operator:
        if other.factor_dims != self.factor_dims:
            raise DimensionMismatch(f"{self.factor_dims} + {other.factor_dims}")
        return Operator(self.mat + other.mat, self.factor_dims)

    def __sub__(self, other: Operator) -> Operator:
        if other.factor_dims != self.factor_dims:
            raise DimensionMismatch(f"{self.factor_dims} - {other.factor_dims}")
        return Operator(self.mat - other.mat, self.factor_dims)

    def scale(self, c: complex) -> Operator:
        return Operator(c * self.mat, self.factor_dims)

    def apply(self, ket: Ket) -> Ket:
        if ket.dim != self.dim:
            raise DimensionMismatch(f"operator dim {self.dim} vs ket dim {ket.dim}")
        return Ket(self.mat @ ket.amp, self.factor_dims)

    def allclose(self, other: Operator, atol: float = IDENTITY_TOL) -> bool:
        return self.mat.shape == other.mat.shape and bool(
            np.max(np.abs(self.mat - other.mat)) <= atol
        )


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalised state vector."""

    amp: np.ndarray
    factor_dims: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        amp = _frozen_array(self.amp).reshape(-1)
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > KET_NORM_TOL:
            raise ValueError(f"ket norm {norm!r} differs from 1 by more than {KET_NORM_TOL}")
        dims = tuple(int(d) for d in self.factor_dims) or (amp.shape[0],)
        if math.prod(dims) != amp.shape[0]:
            raise DimensionMismatch(f"factor_dims {dims} do not multiply to {amp.shape[0]}")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "factor_dims", dims)

    @classmethod
    def normalized(cls, amp, factor_dims: Sequence[int] = ()) -> Ket:
        a = np.asarray(amp, dtype=complex).reshape(-1)
        return cls(a / np.linalg.norm(a), tuple(factor_dims))

    @classmethod
    def basis(cls, index: int, dim: int = 2) -> Ket:
        a = np.zeros(dim, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.amp.shape[0]

    def projector(self) -> Operator:
        return Operator(np.outer(self.amp, self.amp.conj()), self.factor_dims)

    def density(self) -> DensityOperator:
        return DensityOperator(self.projector())


def ket_tensor(*kets: Ket) -> Ket:
    amp = reduce(np.kron, (k.amp for k in kets))
    dims = tuple(d for k in kets for d in k.factor_dims)
    return Ket(amp, dims)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace operator.

    Construct through :func:`validate_density` (or ``Ket.density``) to get
    the invariant checks; the bare constructor trusts its input.
    """

    op: Operator

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return self.op.factor_dims

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))


def identity(dim: int) -> Operator:
    return Operator(np.eye(dim, dtype=complex), (dim,))


def maximally_mixed(factor_dims: Sequence[int]) -> DensityOperator:
    d = math.prod(factor_dims)
    return DensityOperator(Operator(np.eye(d, dtype=complex) / d, tuple(factor_dims)))


def tensor(a: Operator, b: Operator, *rest: Operator) -> Operator:
    """Kronecker product, ``a`` first; factor dims are concatenated.

    Entries are always accumulated left to right over the elementary
    factors, so ``tensor(tensor(a, b), c)`` and ``tensor(a, tensor(b, c))``
    agree bit for bit.
    """
    parts = tuple(p for op in (a, b, *rest) for p in (op.parts or (op,)))
    mat = reduce(np.kron, (p.mat for p in parts))
    dims = tuple(d for p in parts for d in p.factor_dims)
    return Operator(mat, dims, parts)


def tensor_states(*states: DensityOperator) -> DensityOperator:
    return DensityOperator(reduce(tensor, (s.op for s in states)))


def hermitian_part(mat: np.ndarray) -> np.ndarray:
    # (x + conj(y))/2 and (y + conj(x))/2 are exact conjugates in IEEE arithmetic
    return (mat + mat.conj().T) / 2


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """Trace out every factor not listed in ``keep``; kept factors stay in order."""
    dims = rho.factor_dims
    n = len(dims)
    keep_set = set(keep)
    if not keep_set or keep_set == set(range(n)):
        raise InvalidSubsystem(f"keep={sorted(keep_set)} must be a nonempty proper subset of {list(range(n))}")
    bad = [k for k in keep_set if not (isinstance(k, (int, np.integer)) and 0 <= k < n)]
    if bad:
        raise InvalidSubsystem(f"no such factor(s) {bad}; state has {n} factors")
    kept = sorted(keep_set)
    traced = [i for i in range(n) if i not in keep_set]
    t = rho.mat.reshape(dims + dims)
    # move kept row axes, traced row axes, kept col axes, traced col axes
    perm = kept + traced + [n + i for i in kept] + [n + i for i in traced]
    t = np.transpose(t, perm)
    dk = math.prod(dims[i] for i in kept)
    dt = math.prod(dims[i] for i in traced)
    t = t.reshape(dk, dt, dk, dt)
    red = np.einsum("ajbj->ab", t)
    return DensityOperator(Operator(hermitian_part(red), tuple(dims[i] for i in kept)))


def hermiticity_defect(op: Operator) -> float:
    return float(np.max(np.abs(op.mat - op.mat.conj().T)))


def validate_density(op: Operator | np.ndarray, factor_dims: Sequence[int] = ()) -> DensityOperator:
    """Check the three density-operator invariants at ``VALIDITY_TOL``."""
    if not isinstance(op, Operator):
        op = Operator(np.asarray(op), tuple(factor_dims))
    herm = hermiticity_defect(op)
    if herm > VALIDITY_TOL:
        raise NotHermitian(f"max |rho - rho^dagger| = {herm:.3e} exceeds {VALIDITY_TOL:.0e}")
    tr = op.trace()
    if abs(tr - 1.0) > VALIDITY_TOL:
        raise NotUnitTrace(f"trace = {tr.real:.12g}{tr.imag:+.3g}j, |trace - 1| exceeds {VALIDITY_TOL:.0e}")
    lam_min = float(np.linalg.eigvalsh(hermitian_part(op.mat))[0])
    if lam_min < -VALIDITY_TOL:
        raise NotPSD(f"minimum eigenvalue {lam_min:.6g} below -{VALIDITY_TOL:.0e}")
    return DensityOperator(op)


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    apq = a[p, q]
    r = abs(apq)
    if r == 0.0:
        return
    phase = apq / r
    t = 0.5 * math.atan2(2.0 * r, a[p, p].real - a[q, q].real)
    c, s = math.cos(t), math.sin(t)
    # columns p, q of G: (c, s*conj(phase)) and (-s*phase, c)
    g = np.array([[c, -s * phase], [s * np.conj(phase), c]])
    idx = [p, q]
    a[:, idx] = a[:, idx] @ g
    a[idx, :] = g.conj().T @ a[idx, :]
    a[p, q] = a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real
    v[:, idx] = v[:, idx] @ g


def eig_hermitian(op: Operator, max_sweeps: int = 100) -> tuple[list[float], list[Ket]]:
    """Eigen-decomposition by cyclic complex Jacobi rotations.

    Eigenvalues are returned ascending. The order of eigenvectors inside a
    degenerate cluster is not specified.
    """
    herm = hermiticity_defect(op)
    if herm > VALIDITY_TOL:
        raise NotHermitian(f"max |A - A^dagger| = {herm:.3e} exceeds {VALIDITY_TOL:.0e}")
    a = hermitian_part(op.mat).astype(complex)
    n = op.dim
    v = np.eye(n, dtype=complex)
    scale = max(float(np.max(np.abs(a))), 1e-300)
    for _ in range(max_sweeps):
        off = np.max(np.abs(a - np.diag(np.diag(a)))) if n > 1 else 0.0
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                _jacobi_rotate(a, v, p, q)
    vals = np.real(np.diag(a))
    order = np.argsort(vals, kind="stable")
    vecs = [Ket.normalized(v[:, i], op.factor_dims) for i in order]
    return [float(vals[i]) for i in order], vecs


def is_unitary(op: Operator, atol: float = VALIDITY_TOL) -> bool:
    return bool(np.max(np.abs(op.mat.conj().T @ op.mat - np.eye(op.dim))) <= atol)
