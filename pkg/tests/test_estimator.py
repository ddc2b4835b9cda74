from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esdlab.derangement import prob0_fast, prob0_identical
from esdlab.estimator import (
    EstimateUndefined,
    attenuation_qubit_limit,
    bound_qn,
    bound_qn_effective,
    bound_qn_entropy,
    bound_qn_general,
    copies_required,
    method_a,
    method_b,
    overhead_exponent,
    plan_resources,
    sample_prob,
    shots_required,
    suppression_factor,
)
from esdlab.numerics import random_unitary
from esdlab.states import PauliString, pauli_expectation, random_pauli_strings, spectral_data, state_from_spectrum


def dominated_state(N, rng):
    """Random basis, dominant weight in [0.5, 0.95], remaining weight Dirichlet spread."""
    d = 1 << N
    lam = rng.uniform(0.5, 0.95)
    rest = (1 - lam) * rng.dirichlet(np.full(d - 1, 0.3))
    w = np.concatenate([[lam], rest])
    return state_from_spectrum(w, basis=random_unitary(d, rng))


def test_method_a_pure_state():
    assert method_a(1.0, 1.0) == 1.0
    with pytest.raises(EstimateUndefined):
        method_a(0.7, 0.5)


def test_zero_entropy_example():
    # lambda = 0.8 with a single error vector: weights 0.8^3 and 0.2^3
    rho = np.diag([0.8, 0.2]).astype(complex)
    p0 = prob0_identical(rho, 3, "Z")
    pp = prob0_identical(rho, 3)
    assert abs((2 * p0 - 1) - (0.512 - 0.008)) < 1e-15
    assert abs((2 * pp - 1) - (0.512 + 0.008)) < 1e-15
    value = method_a(p0, pp)
    assert abs(value - 0.504 / 0.52) < 1e-12
    bound = bound_qn(0.8, [1.0], 3)
    assert abs(bound.q_n - 0.015625) < 1e-15
    assert abs(1 - value) <= bound.bound_a + 1e-15


def test_method_b_example_one(example_one):
    value = method_b(prob0_identical(example_one, 3), 0.8, 3)
    assert abs(value - 1.0000015625) < 1e-12
    q3 = bound_qn(0.8, np.full(100, 0.01), 3).q_n
    assert abs(q3 - 1.5625e-6) < 1e-15
    assert abs(value - 1) <= q3 + 1e-15


def test_single_copy_method_a_is_unmitigated(rng):
    rho = dominated_state(3, rng)
    for p in random_pauli_strings(3, 10, rng):
        value = method_a(prob0_identical(rho, 1, p), prob0_identical(rho, 1))
        assert value == pytest.approx(float(np.real(pauli_expectation(rho, p))), abs=1e-14)


def test_method_b_pure_and_bad_lambda():
    assert method_b(0.9, 1.0, 3) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        method_b(0.9, 1.2, 2)
    with pytest.raises(EstimateUndefined):
        method_b(0.9, 1e-200, 3)


def test_qn_unit_prefactor():
    p = np.array([0.5, 0.3, 0.2])
    assert bound_qn(0.5, p, 3).q_n == pytest.approx(np.sum(p ** 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.3, 0.99), st.integers(2, 6))
def test_entropy_form_matches_norm_form_and_general_dominates(seed, lam, n):
    p = np.random.default_rng(seed).dirichlet(np.ones(20))
    qn = bound_qn(lam, p, n).q_n
    assert abs(bound_qn_entropy(lam, p, n) - qn) <= 1e-12 * qn
    assert bound_qn_general(lam, p.max(), n) >= qn * (1 - 1e-12)


def test_suppression_factor_and_general_bound():
    assert suppression_factor(0.51, 0.026) == pytest.approx(0.02498, abs=1e-4)
    assert bound_qn_general(0.5, 0.1, 2) == pytest.approx(0.1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.5, 0.99))
def test_qn_strictly_decreasing(seed, lam):
    p = np.random.default_rng(seed).dirichlet(np.ones(10))
    if suppression_factor(lam, p.max()) >= 1:
        return
    qs = [bound_qn(lam, p, n).q_n for n in range(1, 7)]
    assert all(b < a for a, b in zip(qs, qs[1:]))


def test_effective_bound():
    p = np.array([0.6, 0.4])
    eff = bound_qn_effective(0.7, p, 3)
    assert eff.value == pytest.approx(bound_qn(0.7, p, 3).q_n)
    generic = bound_qn_effective(0.4, p, 3, commuting=False)
    assert generic.void and math.isinf(generic.value)
    assert not bound_qn_effective(0.8, p, 3, commuting=False).void


def test_copies_required():
    assert copies_required(1e-6, 0.51, 0.026) == 5
    assert copies_required(10.0, 0.51, 0.026) == 2
    ns = [copies_required(e, 0.7, 0.1) for e in np.logspace(-1, -12, 30)]
    assert ns == sorted(ns)
    with pytest.raises(ValueError):
        copies_required(1e-3, 0.2, 0.9)


def test_overhead_exponent():
    assert overhead_exponent(1e-6, 0.5) == pytest.approx(19.93, abs=0.01)
    assert overhead_exponent(0.51, 0.026) == pytest.approx(0.18, abs=0.005)
    assert overhead_exponent(1.0, 0.3) == 0
    with pytest.raises(ValueError):
        overhead_exponent(0.5, 1.5)


def test_shot_counts():
    assert shots_required("B", 0.01, 0.8, 2, 0.75).total == 18311
    assert shots_required("B", 0.01, 1.0, 2, 0.75).total == math.ceil(4 * 0.75 * 0.25 / 1e-4)
    a = shots_required("A", 0.01, 0.8, 2, 0.75, 0.8)
    assert len(a.counts) == 2 and a.total == sum(a.counts)
    with pytest.raises(ValueError):
        shots_required("A", 0.01, 0.8, 2, 0.75)
    with pytest.raises(ValueError):
        shots_required("C", 0.01, 0.8, 2, 0.75)


def test_sampled_estimators_reach_precision():
    rng = np.random.default_rng(99)
    lam, n, eps = 0.8, 2, 0.02
    p0, pp = 0.5 + 0.5 * 0.3 * lam ** n, 0.5 + 0.5 * lam ** n
    true_b, true_a = (2 * p0 - 1) / lam ** n, (2 * p0 - 1) / (2 * pp - 1)
    sb = shots_required("B", eps, lam, n, p0).total
    sa = shots_required("A", eps, lam, n, p0, pp).counts
    err_b = np.array([method_b(sample_prob(p0, sb, rng), lam, n) - true_b for _ in range(200)])
    err_a = np.array([method_a(sample_prob(p0, sa[0], rng), sample_prob(pp, sa[1], rng)) - true_a
                      for _ in range(200)])
    # 200 draws pin the standard deviation to about 5%; two-sigma coverage is about 95%
    for err in (err_b, err_a):
        assert np.std(err) <= 1.1 * eps
        assert np.mean(np.abs(err) <= 2 * eps) >= 0.9


def test_sample_prob_validation():
    with pytest.raises(ValueError):
        sample_prob(1.5, 10)
    with pytest.raises(ValueError):
        sample_prob(0.5, 0)
    assert sample_prob(1.0, 10, 0) == 1.0


def test_attenuation_limit():
    assert attenuation_qubit_limit(1e-3, 0.1) == 2301
    assert attenuation_qubit_limit(0.01, 0.1) == 229
    assert attenuation_qubit_limit(1e-3, 1.0) == 0
    assert attenuation_qubit_limit(1e-3, 0.0) is None
    assert attenuation_qubit_limit(0.0, 0.1) is None


def test_resource_plan():
    plan = plan_resources(1e-6, 0.51, 0.026)
    assert plan.n == 5
    assert plan.f == pytest.approx(0.18, abs=0.01)
    assert len(plan.shots_A) == 2 and plan.shots_B > 0
    assert plan_resources(1e-3, 1.0, 0.1).f == 0
    assert '"n": 5' in plan.to_json()


def test_method_b_identity_self_consistency(rng):
    rho = dominated_state(2, rng)
    sd = spectral_data(rho)
    for n in (2, 3, 4):
        tr = float(np.real(np.trace(np.linalg.matrix_power(rho, n))))
        err = method_b(prob0_identical(rho, n), sd.lam, n) - 1
        assert err == pytest.approx((tr - sd.lam ** n) / sd.lam ** n, abs=1e-14)


def test_bounds_hold_on_random_states():
    # spectral-path errors against the dominant eigenvector, 50 states x 500 strings
    rng = np.random.default_rng(2024)
    worst = 0.0
    for s in range(50):
        N = 4 + s % 3
        rho = dominated_state(N, rng)
        sd = spectral_data(rho)
        psi = sd.dominant_vector
        paulis = random_pauli_strings(N, 500, rng)
        ideal = [float(np.real(np.vdot(psi, p.matrix() @ psi))) if N < 5 else None for p in paulis]
        for n in (2, 3):
            power = np.linalg.matrix_power(rho, n)
            trn = float(np.real(np.trace(power)))
            b = bound_qn(sd.lam, sd.error_probs, n)
            for p, want in zip(paulis, ideal):
                if want is None:
                    perm, phase = p.action()
                    want = float(np.real(np.sum(psi[perm].conj() * phase * psi)))
                v = float(np.real(pauli_expectation(power, p)))
                err_a = abs(v / trn - want)
                err_b = abs(v / sd.lam ** n - want)
                assert err_a <= b.bound_a * (1 + 1e-9) + 1e-14
                assert err_b <= b.bound_b * (1 + 1e-9) + 1e-14
                worst = max(worst, err_a / b.bound_a)
    assert worst > 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3, 4]))
def test_backend_estimators_respect_bounds(seed, n):
    r = np.random.default_rng(seed)
    rho = dominated_state(2, r)
    sd = spectral_data(rho)
    sigma = random_pauli_strings(2, 1, r)[0]
    want = float(np.real(np.vdot(sd.dominant_vector, sigma.matrix() @ sd.dominant_vector)))
    copies = [rho] * n
    a = method_a(prob0_fast(copies, sigma), prob0_fast(copies, None, include_observable=False))
    b = method_b(prob0_fast(copies, sigma), sd.lam, n)
    bound = bound_qn(sd.lam, sd.error_probs, n)
    assert abs(a - want) <= bound.bound_a * (1 + 1e-9) + 1e-14
    assert abs(b - want) <= bound.bound_b * (1 + 1e-9) + 1e-14
    assert isinstance(sigma, PauliString)
