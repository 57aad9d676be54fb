"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a ``[ACCEPTANCE n] PASS|FAIL`` line (shown even when
pytest captures output) and then asserts.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from artifact import modelio
from artifact.config import ExperimentConfig, PreparationConfig, SourceConfig
from artifact.experiment import deterministic_model, pr_box, run
from artifact.gates import phi_plus
from artifact.linalg import DensityOperator, Ket, Operator, tensor_states
from artifact.measure import (
    TSIRELSON_ANGLES,
    SettingPair,
    chsh_standard_error,
    correlation,
    monte_carlo_model,
)
from artifact.model import check_compatibility
from artifact.process import Effect, bell_like_with_visibility, condition
from artifact.sheaf import chsh_family_value, global_section, induce_model
from artifact.errors import ZeroProbabilityEvent

from generators import (
    pr_box_tables,
    random_angles,
    random_density,
    random_deterministic_mixture,
    random_product_state,
    random_visibility_model,
)

TSIRELSON = 2 * math.sqrt(2)


@pytest.fixture
def verdict(capsys):
    def report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[ACCEPTANCE {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return report


def witness_marginal_gap(model, result) -> float:
    sc = model.scenario
    pos = {x: i for i, x in enumerate(sc.settings)}
    gap = abs(float(sum(result.witness.values())) - 1)
    for c in sc.contexts:
        marg = {s: 0.0 for s in sc.assignments(c)}
        for g, q in result.witness.items():
            if float(q) < 0:
                return math.inf
            marg[tuple(g[pos[x]] for x in c)] += float(q)
        gap = max(gap, max(abs(marg[s] - float(p)) for s, p in model.tables[c].items()))
    return gap


def test_1_tsirelson_point(verdict):
    cfg = ExperimentConfig(
        seed=1,
        source=SourceConfig(kind="fixed", ket=Ket.basis(0)),
        preparation=PreparationConfig("hadamard_cnot"),
        angles=TSIRELSON_ANGLES,
    )
    t0 = time.perf_counter()
    report = run(cfg)
    seconds = time.perf_counter() - t0
    err = abs(report.S - TSIRELSON)
    verdict(1, err <= 1e-12 and seconds < 1.0, f"S = {report.S!r}, |S - 2 sqrt 2| = {err:.2e}, runtime {seconds:.3f} s")


def test_2_correlation_law(verdict):
    rho = phi_plus().density()
    grid = np.linspace(-math.pi, math.pi, 20)
    worst = max(abs(correlation(rho, SettingPair(t, f)) - math.cos(2 * (t - f))) for t in grid for f in grid)
    verdict(2, worst <= 1e-12, f"max |E - cos 2(theta - phi)| over 20x20 grid = {worst:.2e}")


def test_3_product_states_glue(verdict):
    g = np.random.default_rng(2024)
    n, worst_s, worst_gap, failures = 120, 0.0, 0.0, 0
    for _ in range(n):
        model = induce_model(random_product_state(g), random_angles(g))
        s, _ = chsh_family_value(model)
        worst_s = max(worst_s, float(s))
        res = global_section(model)
        if not res.feasible:
            failures += 1
            continue
        worst_gap = max(worst_gap, witness_marginal_gap(model, res))
    ok = worst_s <= 2 + 1e-10 and failures == 0 and worst_gap <= 1e-8
    verdict(3, ok, f"{n} product states: max |S| = {worst_s:.12f}, infeasible = {failures}, max witness gap = {worst_gap:.2e}")


def test_4_violation_no_section(verdict):
    model = induce_model(phi_plus().density(), TSIRELSON_ANGLES)
    details, ok = [], True
    for mode in ("float", "exact"):
        res = global_section(model, mode=mode)
        value = float(res.certificate.value) if res.certificate else math.nan
        good = (not res.feasible) and res.certificate.kind == "chsh" and abs(value - TSIRELSON) <= 1e-8
        ok &= good
        details.append(f"{mode}: {res.verdict}, certificate {value:.12f} (rounding radius {res.rounding_radius:.1e})")
    verdict(4, ok, "; ".join(details))


def generated_models(n: int):
    g = np.random.default_rng(5)
    for k in range(n):
        kind = k % 5
        if kind == 0:
            yield random_deterministic_mixture(g, exact=False)
        elif kind == 1:
            yield random_deterministic_mixture(g, exact=True)
        elif kind == 2:
            yield random_visibility_model(g)
        elif kind == 3:
            yield pr_box_tables(float(g.uniform(0, 1)))
        else:
            # PR box blended with a random local model
            w = float(g.uniform(0, 1))
            local = random_deterministic_mixture(g)
            pr = pr_box_tables(1.0)
            tables = {c: {s: w * pr.tables[c][s] + (1 - w) * local.tables[c][s] for s in pr.tables[c]} for c in pr.tables}
            yield type(pr)(pr.scenario, tables)


def test_5_fine_equivalence(verdict):
    n, agree, feasible = 1000, 0, 0
    for model in generated_models(n):
        s, _ = chsh_family_value(model)
        oracle = float(s) <= 2 + 1e-8
        res = global_section(model)
        agree += res.feasible == oracle
        feasible += res.feasible
    verdict(5, agree == n, f"{agree}/{n} verdicts agree with the CHSH-family test ({feasible} feasible)")


def test_6_visibility_threshold(verdict):
    def feasible_at(v: float) -> bool:
        cfg = ExperimentConfig(preparation=PreparationConfig("visibility_preset", visibility=v), angles=TSIRELSON_ANGLES)
        return run(cfg).section.feasible

    lo, hi = 0.0, 1.0
    assert feasible_at(lo) and not feasible_at(hi)
    while hi - lo > 1e-4:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if feasible_at(mid) else (lo, mid)
    v_star = (lo + hi) / 2
    err = abs(v_star - 1 / math.sqrt(2))
    verdict(6, err <= 1e-3, f"verdict flips at v* = {v_star:.6f}; |v* - 1/sqrt 2| = {err:.2e}")


def dense_oracle(rho: np.ndarray, e: np.ndarray):
    full = np.kron(np.eye(4), e) @ rho
    out = np.array([[sum(full[2 * i + k, 2 * j + k] for k in range(2)) for j in range(4)] for i in range(4)])
    p = float(np.trace(out).real)
    return out / p if p >= 1e-12 else None, p


def test_7_conditioning_algebra(verdict):
    g = np.random.default_rng(7)
    r1, r2 = random_density(g), random_density(g)
    flag0, flag1 = Ket.basis(0).density(), Ket.basis(1).density()
    e0 = Effect.flag(0)
    errors, ok = [], True

    det = tensor_states(r1, flag0)
    state, p = condition(det, e0)
    oracle, p_oracle = dense_oracle(det.mat, e0.op.mat)
    err = max(np.max(np.abs(state.mat - oracle)), abs(p - p_oracle), abs(p - 1), np.max(np.abs(state.mat - r1.mat)))
    ok &= err <= 1e-12
    errors.append(f"deterministic flag err {err:.1e}")

    _, p_oracle = dense_oracle(det.mat, Effect.flag(1).op.mat)
    try:
        condition(det, Effect.flag(1))
        raised = False
    except ZeroProbabilityEvent:
        raised = True
    ok &= raised and p_oracle < 1e-12
    errors.append(f"zero-probability flag raised={raised} (oracle p = {p_oracle:.1e})")

    mix = DensityOperator(Operator((tensor_states(r1, flag0).mat + tensor_states(r2, flag1).mat) / 2, (2, 2, 2)))
    state, p = condition(mix, e0)
    oracle, p_oracle = dense_oracle(mix.mat, e0.op.mat)
    err = max(np.max(np.abs(state.mat - oracle)), abs(p - p_oracle), abs(p - 0.5), np.max(np.abs(state.mat - r1.mat)))
    ok &= err <= 1e-12
    errors.append(f"two-branch mixture err {err:.1e}")
    verdict(7, ok, "; ".join(errors))


def test_8_monte_carlo_consistency(verdict):
    rho = phi_plus().density()
    shots, reps = 10**6, 100
    sigma = chsh_standard_error([correlation(rho, s) for s in TSIRELSON_ANGLES.pairs()], shots)
    t0 = time.perf_counter()
    inside = 0
    for seed in range(reps):
        s, _ = chsh_family_value(monte_carlo_model(rho, TSIRELSON_ANGLES, shots, seed))
        inside += abs(float(s) - TSIRELSON) <= 3 * sigma
    seconds = time.perf_counter() - t0
    ok = inside >= 95 and seconds < 60
    verdict(8, ok, f"{inside}/{reps} repetitions within 3 sigma (sigma = {sigma:.2e}); runtime {seconds:.2f} s")


def test_9_no_signalling(verdict):
    g = np.random.default_rng(9)
    n = 150
    worst = max(check_compatibility(induce_model(random_density(g), random_angles(g)), 1e-10).max_deviation for _ in range(n))
    verdict(9, worst <= 1e-10, f"{n} random states: max overlap deviation {worst:.2e}")


def test_10_interchange_round_trip(verdict):
    g = np.random.default_rng(10)
    models = [pr_box(), deterministic_model({"a": 1, "a'": 1, "b": -1, "b'": 1}), pr_box_tables(Fraction(1, 2), exact=True)]
    models += [random_deterministic_mixture(g, exact=True) for _ in range(20)]
    models += [monte_carlo_model(bell_like_with_visibility(0.9), TSIRELSON_ANGLES, 1000, seed) for seed in range(3)]
    exact_ok, verdicts_ok = True, True
    for m in models:
        back = modelio.loads(modelio.dumps(m))
        exact_ok &= back == m and modelio.dumps(back) == modelio.dumps(m)
        if check_compatibility(m, 1e-10).passed:
            for mode in ("float", "exact"):
                verdicts_ok &= global_section(back, mode=mode).verdict == global_section(m, mode=mode).verdict
    verdict(10, exact_ok and verdicts_ok, f"{len(models)} rational models: exact round trip {exact_ok}, verdicts identical {verdicts_ok}")
