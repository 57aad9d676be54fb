import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from artifact.errors import DimensionMismatch, NotUnitary, OutOfRange, ZeroProbabilityEvent
from artifact.gates import phi_plus, projector
from artifact.linalg import DensityOperator, Ket, Operator, identity, maximally_mixed, partial_trace, tensor_states
from artifact.process import (
    CHUNK,
    Effect,
    Instrument,
    JonesSource,
    KrausMap,
    apply_kraus,
    bell_like_with_visibility,
    bell_network,
    condition,
    ensemble_state,
    parity_flag_network,
    run_instrument,
    sample_amplitudes,
    sample_source,
)

from conftest import random_density, random_unitary, seeds


def dense_condition_oracle(rho: np.ndarray, e: np.ndarray, d_r: int, d_e: int):
    """(id (x) e) rho as a full matrix product, then Tr_E by explicit sums."""
    full = np.kron(np.eye(d_r), e) @ rho
    out = np.zeros((d_r, d_r), dtype=complex)
    for i in range(d_r):
        for j in range(d_r):
            out[i, j] = sum(full[i * d_e + k, j * d_e + k] for k in range(d_e))
    p = np.trace(out).real
    return out / p, p


def flagged(rho_ab: DensityOperator, flag: int) -> DensityOperator:
    return tensor_states(rho_ab, Ket.basis(flag).density())


# apply_kraus / run_instrument


def test_apply_kraus_identity():
    rho = phi_plus().density()
    out, p = apply_kraus(KrausMap([identity(2).__class__(np.eye(4), (2, 2))]), rho)
    np.testing.assert_allclose(out.mat, rho.mat, atol=1e-15)
    assert p == pytest.approx(1, abs=1e-15)


def test_apply_kraus_projective_branch():
    out, p = apply_kraus(KrausMap([projector(0, +1)]), maximally_mixed((2,)))
    np.testing.assert_allclose(out.mat, np.diag([0.5, 0]), atol=1e-15)
    assert p == pytest.approx(0.5, abs=1e-15)
    marginal = partial_trace(phi_plus().density(), [0])
    _, p = apply_kraus(KrausMap([projector(math.pi / 8, +1)]), marginal)
    assert p == pytest.approx(0.5, abs=1e-12)


def test_apply_kraus_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_kraus(KrausMap([identity(2)]), phi_plus().density())


def test_kraus_map_rejects_trace_increasing():
    with pytest.raises(ValueError):
        KrausMap([Operator(np.eye(2) * 1.1)])


def projective_instrument(theta=0.0) -> Instrument:
    return Instrument({"+": KrausMap([projector(theta, +1)]), "-": KrausMap([projector(theta, -1)])})


def test_run_instrument_examples():
    marginal = partial_trace(phi_plus().density(), [0])
    probs = [b.prob for b in run_instrument(projective_instrument(), marginal)]
    assert probs == pytest.approx([0.5, 0.5], abs=1e-12)

    rho = random_density(np.random.default_rng(0), (2,))
    (branch,) = run_instrument(Instrument({"id": KrausMap([identity(2)])}), rho)
    assert branch.prob == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(branch.state.mat, rho.mat, atol=1e-12)

    plus, minus = run_instrument(projective_instrument(), Ket.basis(0).density())
    assert (plus.prob, minus.prob) == (pytest.approx(1), pytest.approx(0))
    assert minus.state is None and plus.state is not None


def test_instrument_must_be_trace_preserving():
    with pytest.raises(ValueError):
        Instrument({"+": KrausMap([projector(0, +1)])})


@given(seeds, st.integers(1, 4))
def test_random_instrument_probabilities_sum_to_one(seed, n_branches):
    g = np.random.default_rng(seed)
    # slice a random isometry into Kraus blocks: sum K^dagger K = I
    v = random_unitary(g, 4 * n_branches)[:, :4]
    inst = Instrument(
        {str(i): KrausMap([Operator(v[4 * i : 4 * i + 4], (2, 2))]) for i in range(n_branches)}
    )
    branches = run_instrument(inst, random_density(g))
    assert abs(sum(b.prob for b in branches) - 1) <= 1e-9
    for b in branches:
        if b.state is not None:
            assert np.linalg.eigvalsh(b.state.mat)[0] >= -1e-10


@given(seeds)
def test_apply_kraus_completely_positive(seed):
    g = np.random.default_rng(seed)
    ks = [g.standard_normal((2, 2)) + 1j * g.standard_normal((2, 2)) for _ in range(3)]
    norm = np.linalg.eigvalsh(sum(k.conj().T @ k for k in ks))[-1]
    kmap = KrausMap([Operator(np.kron(np.eye(2), k) / math.sqrt(norm), (2, 2)) for k in ks])
    out, _ = apply_kraus(kmap, random_density(g))
    assert np.linalg.eigvalsh(out.mat)[0] >= -1e-10


# condition


def test_condition_deterministic_flag():
    rho = random_density(np.random.default_rng(1))
    out, p = condition(flagged(rho, 0), Effect.flag(0))
    oracle, p_oracle = dense_condition_oracle(flagged(rho, 0).mat, np.diag([1, 0]), 4, 2)
    assert p == pytest.approx(1, abs=1e-12) and p_oracle == pytest.approx(1, abs=1e-12)
    assert np.max(np.abs(out.mat - oracle)) <= 1e-12
    assert np.max(np.abs(out.mat - rho.mat)) <= 1e-12
    assert out.factor_dims == (2, 2)


def test_condition_zero_probability():
    with pytest.raises(ZeroProbabilityEvent):
        condition(flagged(phi_plus().density(), 0), Effect.flag(1))


def test_condition_two_branch_mixture():
    g = np.random.default_rng(2)
    r1, r2 = random_density(g), random_density(g)
    mix = DensityOperator(Operator((flagged(r1, 0).mat + flagged(r2, 1).mat) / 2, (2, 2, 2)))
    out, p = condition(mix, Effect.flag(0))
    oracle, p_oracle = dense_condition_oracle(mix.mat, np.diag([1, 0]), 4, 2)
    assert p == pytest.approx(0.5, abs=1e-12)
    assert abs(p - p_oracle) <= 1e-12
    assert np.max(np.abs(out.mat - oracle)) <= 1e-12
    assert np.max(np.abs(out.mat - r1.mat)) <= 1e-12


def test_condition_dim_checks():
    with pytest.raises(DimensionMismatch):
        condition(flagged(phi_plus().density(), 0), Effect(identity(4)))
    with pytest.raises(DimensionMismatch):
        condition(maximally_mixed((2,)), Effect.flag(0))


def test_effect_bounds():
    with pytest.raises(ValueError):
        Effect(Operator(np.diag([1.5, 0])))
    with pytest.raises(ValueError):
        Effect(Operator(np.diag([-0.1, 0.5])))
    Effect(Operator(np.diag([0.3, 0.9])))


@given(seeds)
def test_condition_general_effect_matches_oracle(seed):
    g = np.random.default_rng(seed)
    rho = random_density(g, (2, 2, 2))
    lam = g.uniform(0, 1, 2)
    u = random_unitary(g, 2)
    e = u @ np.diag(lam) @ u.conj().T
    out, p = condition(rho, Effect(Operator(e)))
    oracle, p_oracle = dense_condition_oracle(rho.mat, e, 4, 2)
    assert abs(p - p_oracle) <= 1e-12
    assert np.max(np.abs(out.mat - oracle)) <= 1e-12


@given(seeds)
def test_condition_idempotent(seed):
    g = np.random.default_rng(seed)
    rho = random_density(g, (2, 2, 2))
    e = Effect.flag(0)
    once, _ = condition(rho, e)
    twice, p2 = condition(flagged(once, 0), e)
    assert p2 == pytest.approx(1, abs=1e-12)
    assert np.max(np.abs(once.mat - twice.mat)) <= 1e-12


@given(seeds, st.integers(2, 4))
def test_condition_flag_linearity(seed, k):
    g = np.random.default_rng(seed)
    weights = g.dirichlet(np.ones(k))
    states = [random_density(g, (2, 2, 2)) for _ in range(k)]
    e = Effect.flag(0)
    mix = DensityOperator(Operator(sum(w * s.mat for w, s in zip(weights, states)), (2, 2, 2)))
    out, p = condition(mix, e)
    parts = [condition(s, e) for s in states]
    expected = sum(w * q * r.mat for w, (r, q) in zip(weights, parts)) / p
    assert abs(p - sum(w * q for w, (_, q) in zip(weights, parts))) <= 1e-12
    assert np.max(np.abs(out.mat - expected)) <= 1e-12


# sources and ensembles


def test_fixed_source():
    kets = sample_source(JonesSource.fixed(Ket.basis(0)), 3)
    assert len(kets) == 3
    for k in kets:
        np.testing.assert_array_equal(k.amp, [1, 0])


def test_uniform_source_moment():
    n = 10**5
    amp = sample_amplitudes(JonesSource.uniform_linear(0, math.pi, seed=7), n)
    c2 = np.abs(amp[:, 0]) ** 2
    # cos^2 of a uniform angle has mean 1/2 and variance 1/8
    assert abs(c2.mean() - 0.5) <= 3 * math.sqrt(1 / 8 / n)


def test_von_mises_source_moment():
    n, kappa, mean = 10**5, 2.5, 0.3
    amp = sample_amplitudes(JonesSource.von_mises_linear(mean, kappa, seed=11), n)
    theta = np.arctan2(amp[:, 1].real, amp[:, 0].real)
    c = np.cos(2 * (theta - mean))
    expected = special.i1(kappa) / special.i0(kappa)
    assert abs(c.mean() - expected) <= 3 * c.std() / math.sqrt(n)


def test_depolarized_mix_moment():
    n, w = 10**5, 0.7
    amp = sample_amplitudes(JonesSource.depolarized_mix(Ket.basis(0), w, seed=3), n)
    # Haar average of |<0|psi>|^2 is 1/2
    p0 = np.abs(amp[:, 0]) ** 2
    assert abs(p0.mean() - (w + (1 - w) / 2)) <= 3 * p0.std() / math.sqrt(n)


@pytest.mark.parametrize(
    "src",
    [
        JonesSource.uniform_linear(seed=5),
        JonesSource.von_mises_linear(0.1, 1.0, seed=5),
        JonesSource.depolarized_mix(Ket.basis(1), 0.5, seed=5),
    ],
)
def test_sources_deterministic_and_normalised(src):
    a = sample_amplitudes(src, CHUNK + 17)
    b = sample_amplitudes(src, CHUNK + 17)
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(np.linalg.norm(a, axis=1) - 1)) <= 1e-12
    # a prefix does not depend on how many draws follow
    np.testing.assert_array_equal(sample_amplitudes(src, 10), a[:10])


def test_source_validation():
    with pytest.raises(OutOfRange):
        JonesSource.uniform_linear(1.0, 1.0)
    with pytest.raises(OutOfRange):
        JonesSource.von_mises_linear(0.0, -1.0)
    with pytest.raises(OutOfRange):
        JonesSource.depolarized_mix(Ket.basis(0), 1.5)
    with pytest.raises(ValueError):
        JonesSource("gaussian")


@pytest.mark.parametrize("n", [1, 5, CHUNK + 1])
def test_ensemble_fixed_source_gives_phi_plus(n):
    u, anc = bell_network()
    out = ensemble_state(JonesSource.fixed(Ket.basis(0)), u, anc, n)
    np.testing.assert_allclose(out.mat, phi_plus().density().mat, atol=1e-15)


def test_ensemble_single_draw_is_pure():
    u, anc = bell_network()
    out = ensemble_state(JonesSource.uniform_linear(seed=1), u, anc, 1)
    assert out.purity() == pytest.approx(1, abs=1e-12)


def uniform_ensemble_oracle(low: float, high: float) -> np.ndarray:
    """Entrywise quadrature of the averaged output state, network written by hand."""
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    u = cx @ np.kron(h, np.eye(2))

    def entry(theta, i, j):
        psi = u @ np.kron([math.cos(theta), math.sin(theta)], [1, 0])
        return (psi[i] * psi[j]).real

    out = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            out[i, j] = integrate.quad(entry, low, high, args=(i, j))[0] / (high - low)
    return out


def test_ensemble_uniform_matches_quadrature():
    low, high = 0.2, 1.3
    u, anc = bell_network()
    out = ensemble_state(JonesSource.uniform_linear(low, high, seed=9), u, anc, 10**5)
    oracle = uniform_ensemble_oracle(low, high)
    assert np.max(np.abs(out.mat - oracle)) <= 1e-2
    np.testing.assert_allclose(uniform_ensemble_oracle(0, math.pi), np.diag([0.5, 0, 0, 0.5]), atol=1e-12)


def test_ensemble_bit_identical_across_workers():
    u, anc = bell_network()
    src = JonesSource.depolarized_mix(Ket.normalized([1, 1j]), 0.3, seed=4)
    serial = ensemble_state(src, u, anc, 5 * CHUNK + 3, workers=1)
    threaded = ensemble_state(src, u, anc, 5 * CHUNK + 3, workers=4)
    np.testing.assert_array_equal(serial.mat, threaded.mat)


@given(seeds, st.integers(1, 3000))
def test_ensemble_valid_state(seed, n):
    u, anc = bell_network()
    out = ensemble_state(JonesSource.depolarized_mix(Ket.basis(0), 0.5, seed=seed), u, anc, n)
    assert abs(np.trace(out.mat) - 1) <= 1e-14
    assert np.linalg.eigvalsh(out.mat)[0] >= -1e-10


def test_ensemble_errors():
    u, anc = bell_network()
    with pytest.raises(NotUnitary):
        ensemble_state(JonesSource.fixed(Ket.basis(0)), Operator(2 * np.eye(4), (2, 2)), anc, 1)
    with pytest.raises(DimensionMismatch):
        ensemble_state(JonesSource.fixed(Ket.basis(0)), u, Ket.basis(0, 4), 1)


def test_parity_flag_network_conditions_to_phi_plus():
    u, anc, e = parity_flag_network()
    rho = ensemble_state(JonesSource.fixed(Ket.basis(0)), u, anc, 1)
    out, p = condition(rho, e)
    assert p == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(out.mat, phi_plus().density().mat, atol=1e-12)


def test_visibility_family():
    np.testing.assert_allclose(bell_like_with_visibility(1).mat, phi_plus().density().mat, atol=1e-15)
    np.testing.assert_allclose(bell_like_with_visibility(0).mat, np.eye(4) / 4, atol=1e-15)
    with pytest.raises(OutOfRange):
        bell_like_with_visibility(1.01)
    with pytest.raises(OutOfRange):
        bell_like_with_visibility(-0.01)


def test_visibility_half_spectrum_in_bell_basis():
    r = 1 / math.sqrt(2)
    bell = np.array([[r, 0, 0, r], [r, 0, 0, -r], [0, r, r, 0], [0, r, -r, 0]]).T
    in_bell = bell.conj().T @ bell_like_with_visibility(0.5).mat @ bell
    # diagonal in the Bell basis, so its diagonal is the spectrum
    assert np.max(np.abs(in_bell - np.diag(np.diag(in_bell)))) <= 1e-15
    np.testing.assert_allclose(sorted(np.diag(in_bell).real, reverse=True), [5 / 8, 1 / 8, 1 / 8, 1 / 8], atol=1e-15)
    from artifact.linalg import eig_hermitian

    vals, _ = eig_hermitian(bell_like_with_visibility(0.5))
    np.testing.assert_allclose(vals, [1 / 8, 1 / 8, 1 / 8, 5 / 8], atol=1e-12)
