"""Concrete process layer: Kraus-form CP maps, flagged instruments,
conditioning on flag effects, and stochastic Jones-vector sources.

The flag system is always the last tensor factor.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from . import rng
from .errors import (
    DimensionMismatch,
    NotUnitary,
    OutOfRange,
    ZeroProbabilityEvent,
)
from .gates import cnot, hadamard, phi_plus
from .linalg import (
    VALIDITY_TOL,
    DensityOperator,
    Ket,
    Operator,
    hermitian_part,
    identity,
    is_unitary,
    ket_tensor,
    tensor,
    validate_density,
)

ZERO_PROB = 1e-12
# realizations per RNG substream; fixed so the reduction tree never depends on workers
CHUNK = 4096


@dataclass(frozen=True)
class KrausMap:
    kraus_ops: tuple[Operator, ...]

    def __post_init__(self) -> None:
        ops = tuple(self.kraus_ops)
        if not ops:
            raise ValueError("a Kraus map needs at least one operator")
        dims = ops[0].factor_dims
        if any(k.factor_dims != dims for k in ops):
            raise DimensionMismatch("Kraus operators have differing factor_dims")
        object.__setattr__(self, "kraus_ops", ops)
        lam_max = float(np.linalg.eigvalsh(hermitian_part(self.completeness()))[-1])
        if lam_max > 1 + VALIDITY_TOL:
            raise ValueError(f"sum K^dagger K has eigenvalue {lam_max:.6g} > 1; map is trace-increasing")

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return self.kraus_ops[0].factor_dims

    def completeness(self) -> np.ndarray:
        return sum(k.mat.conj().T @ k.mat for k in self.kraus_ops)

    def is_trace_preserving(self, atol: float = VALIDITY_TOL) -> bool:
        d = self.kraus_ops[0].dim
        return bool(np.max(np.abs(self.completeness() - np.eye(d))) <= atol)


def apply_kraus(kmap: KrausMap, rho: DensityOperator) -> tuple[Operator, float]:
    """Unnormalised image sum_k K rho K^dagger and its trace."""
    if rho.factor_dims != kmap.factor_dims:
        raise DimensionMismatch(f"map acts on {kmap.factor_dims}, state is {rho.factor_dims}")
    out = sum(k.mat @ rho.mat @ k.mat.conj().T for k in kmap.kraus_ops)
    out = hermitian_part(out)
    return Operator(out, rho.factor_dims), float(np.real(np.trace(out)))


@dataclass(frozen=True)
class Instrument:
    branches: Mapping[str, KrausMap]

    def __post_init__(self) -> None:
        branches = dict(self.branches)
        if not branches:
            raise ValueError("an instrument needs at least one branch")
        maps = list(branches.values())
        dims = maps[0].factor_dims
        if any(m.factor_dims != dims for m in maps):
            raise DimensionMismatch("instrument branches act on different systems")
        total = sum(m.completeness() for m in maps)
        defect = float(np.max(np.abs(total - np.eye(total.shape[0]))))
        if defect > VALIDITY_TOL:
            raise ValueError(f"instrument is not trace preserving (defect {defect:.3e})")
        object.__setattr__(self, "branches", branches)

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return next(iter(self.branches.values())).factor_dims


class Branch(NamedTuple):
    flag: str
    prob: float
    state: DensityOperator | None  # None marks a branch that never occurs


def run_instrument(inst: Instrument, rho: DensityOperator) -> list[Branch]:
    if rho.factor_dims != inst.factor_dims:
        raise DimensionMismatch(f"instrument acts on {inst.factor_dims}, state is {rho.factor_dims}")
    out = []
    for flag, kmap in inst.branches.items():
        unnorm, p = apply_kraus(kmap, rho)
        if p < ZERO_PROB:
            out.append(Branch(flag, p, None))
        else:
            out.append(Branch(flag, p, validate_density(unnorm.scale(1.0 / p))))
    return out


@dataclass(frozen=True)
class Effect:
    op: Operator

    def __post_init__(self) -> None:
        m = self.op.mat
        if np.max(np.abs(m - m.conj().T)) > VALIDITY_TOL:
            raise ValueError("effect must be Hermitian")
        lam = np.linalg.eigvalsh(hermitian_part(m))
        if lam[0] < -VALIDITY_TOL or lam[-1] > 1 + VALIDITY_TOL:
            raise ValueError(f"effect eigenvalues must lie in [0, 1], got [{lam[0]:.6g}, {lam[-1]:.6g}]")

    @classmethod
    def flag(cls, index: int, dim: int = 2) -> Effect:
        return cls(Ket.basis(index, dim).projector())


def condition(rho_abe: DensityOperator, e: Effect) -> tuple[DensityOperator, float]:
    """Apply the effect ``e`` to the last (flag) factor and renormalise.

    Returns the conditioned state on the remaining factors together with
    the success probability of the retained event.
    """
    dims = rho_abe.factor_dims
    if len(dims) < 2:
        raise DimensionMismatch("conditioning needs a system factor and a flag factor")
    d_e = dims[-1]
    if e.op.dim != d_e:
        raise DimensionMismatch(f"effect dim {e.op.dim} does not match flag factor dim {d_e}")
    d_r = rho_abe.dim // d_e
    t = rho_abe.mat.reshape(d_r, d_e, d_r, d_e)
    # Tr_E[(id (x) e) rho]
    unnorm = np.einsum("ajbk,kj->ab", t, e.op.mat)
    unnorm = hermitian_part(unnorm)
    p = float(np.real(np.trace(unnorm)))
    if p < ZERO_PROB:
        raise ZeroProbabilityEvent(f"retained flag event has probability {p:.3e} < {ZERO_PROB:.0e}")
    return validate_density(Operator(unnorm / p, dims[:-1])), p


@dataclass(frozen=True)
class JonesSource:
    """Distribution of single-beam Jones vectors plus the seed that drives it.

    ``kind`` is one of ``fixed``, ``uniform_linear`` (angle in
    [low, high)), ``von_mises_linear`` (polarization angle with mean
    ``mean`` and concentration ``kappa`` on the doubled angle) and
    ``depolarized_mix`` (``ket`` with probability ``weight``, otherwise a
    Haar-random ket).
    """

    kind: str
    seed: int = 0
    ket: Ket | None = None
    low: float = 0.0
    high: float = math.pi
    mean: float = 0.0
    kappa: float = 0.0
    weight: float = 1.0

    KINDS = ("fixed", "uniform_linear", "von_mises_linear", "depolarized_mix")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind in ("fixed", "depolarized_mix"):
            if self.ket is None or self.ket.dim != 2:
                raise DimensionMismatch(f"{self.kind} source needs a 2-dim ket")
        if self.kind == "uniform_linear" and not self.high > self.low:
            raise OutOfRange(f"uniform_linear needs high > low, got [{self.low}, {self.high})")
        if self.kind == "von_mises_linear" and self.kappa < 0:
            raise OutOfRange(f"concentration must be >= 0, got {self.kappa}")
        if self.kind == "depolarized_mix" and not 0.0 <= self.weight <= 1.0:
            raise OutOfRange(f"mixing weight must lie in [0, 1], got {self.weight}")

    @classmethod
    def fixed(cls, ket: Ket, seed: int = 0) -> JonesSource:
        return cls("fixed", seed, ket=ket)

    @classmethod
    def uniform_linear(cls, low: float = 0.0, high: float = math.pi, seed: int = 0) -> JonesSource:
        return cls("uniform_linear", seed, low=low, high=high)

    @classmethod
    def von_mises_linear(cls, mean: float, kappa: float, seed: int = 0) -> JonesSource:
        return cls("von_mises_linear", seed, mean=mean, kappa=kappa)

    @classmethod
    def depolarized_mix(cls, ket: Ket, weight: float, seed: int = 0) -> JonesSource:
        return cls("depolarized_mix", seed, ket=ket, weight=weight)


def _linear(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=1).astype(complex)


def _haar(gen: np.random.Generator, m: int) -> np.ndarray:
    g = gen.standard_normal((m, 4))
    z = g[:, :2] + 1j * g[:, 2:]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _draw_chunk(src: JonesSource, chunk: int, m: int) -> np.ndarray:
    if src.kind == "fixed":
        return np.tile(src.ket.amp, (m, 1))
    gen = rng.stream(src.seed, "jones", chunk)
    if src.kind == "uniform_linear":
        return _linear(gen.uniform(src.low, src.high, m))
    if src.kind == "von_mises_linear":
        # polarization angles live on a circle of period pi
        return _linear(src.mean + gen.vonmises(0.0, src.kappa, m) / 2)
    # separate substreams keep every draw independent of the chunk length
    keep = gen.random(m) < src.weight
    haar = _haar(rng.stream(src.seed, "jones-haar", chunk), m)
    return np.where(keep[:, None], src.ket.amp[None, :], haar)


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK, n - c * CHUNK)) for c in range((n + CHUNK - 1) // CHUNK)]


def sample_amplitudes(src: JonesSource, n: int) -> np.ndarray:
    """``n`` Jones vectors as an ``(n, 2)`` array, deterministic given the seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.concatenate([_draw_chunk(src, c, m) for c, m in _chunks(n)])


def sample_source(src: JonesSource, n: int) -> list[Ket]:
    return [Ket(a) for a in sample_amplitudes(src, n)]


def _pairwise_sum(parts: list[np.ndarray]) -> np.ndarray:
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def ensemble_state(
    src: JonesSource,
    network: Operator,
    ancilla_prep: Ket,
    n: int,
    workers: int | None = None,
) -> DensityOperator:
    """Average of U(|psi_i> (x) |anc>) over ``n`` source draws.

    Realizations are processed in fixed-size chunks, each with its own
    substream, and chunk sums are combined by a fixed pairwise tree, so the
    result is bit-identical for any ``workers``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if network.dim != 2 * ancilla_prep.dim:
        raise DimensionMismatch(
            f"network dim {network.dim} != source dim 2 x ancilla dim {ancilla_prep.dim}"
        )
    if not is_unitary(network):
        raise NotUnitary("network is not unitary within 1e-10")
    dims = (2,) + ancilla_prep.factor_dims
    u_t = network.mat.T
    anc = ancilla_prep.amp

    def chunk_sum(job: tuple[int, int]) -> np.ndarray:
        c, m = job
        psi = _draw_chunk(src, c, m)
        full = (psi[:, :, None] * anc[None, None, :]).reshape(m, -1)
        out = full @ u_t
        return out.T @ out.conj()

    jobs = _chunks(n)
    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_sum, jobs))
    else:
        parts = [chunk_sum(j) for j in jobs]
    total = hermitian_part(_pairwise_sum(parts))
    total = total / np.real(np.trace(total))
    return validate_density(Operator(total, dims))


def bell_like_with_visibility(v: float) -> DensityOperator:
    """v |Phi+><Phi+| + (1 - v) I/4 (isotropic-noise convention)."""
    if not 0.0 <= v <= 1.0:
        raise OutOfRange(f"visibility must lie in [0, 1], got {v}")
    mat = v * phi_plus().projector().mat + (1.0 - v) * np.eye(4) / 4
    return validate_density(Operator(mat, (2, 2)))


def parity_flag_network() -> tuple[Operator, Ket, Effect]:
    """Flagged preparation on A (x) B (x) E that removes terms by conditioning.

    Both beams get a Hadamard; the flag E records the parity of A and B.
    With A and B in |0>, the retained even-parity branch (E = 0) is
    |Phi+>, occurring with probability 1/2. Returns (network, ancilla for
    B (x) E, retained flag effect).
    """
    i2 = identity(2)
    h = hadamard()
    cx = cnot().mat
    swap_be = np.eye(8)[[0, 2, 1, 3, 4, 6, 5, 7]]
    # CNOT A->E: act on (A, E) with B in the middle
    cnot_ae = swap_be @ np.kron(cx, np.eye(2)) @ swap_be
    cnot_be = np.kron(np.eye(2), cx)
    mat = cnot_be @ cnot_ae @ tensor(h, h, i2).mat
    anc = ket_tensor(Ket.basis(0), Ket.basis(0))
    return Operator(mat, (2, 2, 2)), anc, Effect.flag(0)


def bell_network() -> tuple[Operator, Ket]:
    """CNOT . (H (x) I) with B prepared in |0>."""
    return cnot() @ tensor(hadamard(), identity(2)), Ket.basis(0)

