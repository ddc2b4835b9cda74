from __future__ import annotations

import numpy as np
import pytest

from esdlab.circuits import hardware_noise
from esdlab.states import basis_state, expectation, pure_state, spectral_data, vector_expectation
from esdlab.vqe import (
    REFERENCE_OMEGA_6,
    OptimizerConfig,
    SpinRingSpec,
    VhaParams,
    build_spin_ring,
    build_vha,
    energy_with_esd,
    energy_with_esd_zne,
    exact_ground_energy,
    initial_bits,
    noisy_vha_state,
    optimize_vha,
    spectral_energy,
    vha_energy,
    vha_state,
)


def power_method_ground_energy(h: np.ndarray, iterations: int = 20000) -> float:
    # oracle: power iteration on the shifted matrix c - H, whose top eigenvector is the ground state
    c = np.sum(np.abs(h), axis=1).max()
    m = c * np.eye(len(h)) - h
    v = np.random.default_rng(0).standard_normal(len(h)) + 0j
    for _ in range(iterations):
        v = m @ v
        v /= np.linalg.norm(v)
    return float(np.real(np.vdot(v, h @ v)))


@pytest.fixture(scope="module")
def ring4():
    return SpinRingSpec.from_seed(4, 0.1, 7)


def test_reference_ring_term_count():
    h = build_spin_ring(SpinRingSpec(6, 0.1, REFERENCE_OMEGA_6))
    assert len(h.terms) == 24
    small = build_spin_ring(SpinRingSpec(2, 0.1, (0.3, -0.2)))
    letters = [p.letters for _, p in small.terms]
    assert letters == ["ZI", "IZ", "XX", "YY", "ZZ"]


def test_spin_ring_validation():
    with pytest.raises(ValueError):
        SpinRingSpec(1, 0.1, (0.2,))
    with pytest.raises(ValueError):
        SpinRingSpec(3, 0.1, (0.2, 0.1))
    with pytest.raises(ValueError):
        SpinRingSpec.from_config({"N": 4})
    assert SpinRingSpec.from_config({"N": 6}).omega == REFERENCE_OMEGA_6


def test_ground_energy_matches_power_method(ring4):
    h = build_spin_ring(ring4).matrix()
    assert np.allclose(h, h.conj().T)
    e0, vec = exact_ground_energy(build_spin_ring(ring4))
    assert abs(e0 - power_method_ground_energy(h)) < 1e-8
    assert abs(np.vdot(vec, h @ vec).real - e0) < 1e-12


def test_vha_entangler_counts():
    spec = SpinRingSpec(6, 0.1, REFERENCE_OMEGA_6)
    for layers, count in ((1, 18), (20, 360)):
        params = VhaParams(np.full(layers, 0.1), np.full(layers, 0.2))
        assert build_vha(spec, params, native=True).count(entangling=True) == count
        assert build_vha(spec, params, native=False).count(entangling=True) == count


def test_vha_zero_angles_keep_initial_state(ring4):
    psi = vha_state(ring4, VhaParams(np.zeros(3), np.zeros(3)))
    expected = basis_state(initial_bits(ring4))
    assert np.allclose(pure_state(psi), expected)


def test_native_and_direct_vha_agree(ring4):
    params = VhaParams([0.3, 0.7], [0.5, -0.2])
    rho = noisy_vha_state(ring4, params, None)
    assert np.allclose(rho, pure_state(vha_state(ring4, params)), atol=1e-12)


def test_optimizer_contracts(ring4):
    init = VhaParams([0.1, 0.2], [0.3, 0.4])
    none = optimize_vha(ring4, 2, OptimizerConfig(iterations=0), initial=init)
    assert np.array_equal(none.params.vector(), init.vector())
    res = optimize_vha(ring4, 2, OptimizerConfig(iterations=40), seed=1)
    assert all(b <= a for a, b in zip(res.trajectory, res.trajectory[1:]))
    assert res.energy == pytest.approx(vha_energy(ring4, res.params))


def test_noiseless_esd_is_exact(ring4):
    h = build_spin_ring(ring4)
    params = VhaParams([0.4, 0.9], [0.8, 0.3])
    rho = noisy_vha_state(ring4, params, None)
    want = vha_energy(ring4, params)
    for n in (2, 3):
        assert energy_with_esd(rho, h, n).energy == pytest.approx(want, abs=1e-10)


@pytest.fixture(scope="module")
def noisy_state(ring4):
    params = VhaParams([0.4, 0.9, 0.5], [0.8, 0.3, 0.6])
    return noisy_vha_state(ring4, params, hardware_noise(0.004))


def test_esd_matches_spectral_formula(ring4, noisy_state):
    h = build_spin_ring(ring4)
    for n in (2, 3):
        esd = energy_with_esd(noisy_state, h, n).energy
        assert abs(esd - spectral_energy(noisy_state, h, n)) < 1e-9
    assert energy_with_esd(noisy_state, h, 1).energy == pytest.approx(expectation(noisy_state, h), abs=1e-12)


def test_more_copies_approach_dominant_energy(ring4, noisy_state):
    h = build_spin_ring(ring4)
    target = vector_expectation(spectral_data(noisy_state).dominant_vector, h)
    gaps = [abs(energy_with_esd(noisy_state, h, n).energy - target) for n in range(1, 6)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_method_b_energy(ring4, noisy_state):
    h = build_spin_ring(ring4)
    lam = spectral_data(noisy_state).lam
    b = energy_with_esd(noisy_state, h, 3, method="B", lam=lam).energy
    power = np.linalg.matrix_power(noisy_state, 3)
    identity = sum(c for c, p in h.terms if p.is_identity)
    traceless = np.trace(h.matrix() @ power).real - identity * np.trace(power).real
    assert b == pytest.approx(identity + traceless / lam ** 3, abs=1e-12)
    with pytest.raises(ValueError):
        energy_with_esd(noisy_state, h, 3, method="B")
    with pytest.raises(ValueError):
        energy_with_esd(noisy_state, h)


def test_derangement_noise_extrapolates_back():
    spec = SpinRingSpec(2, 0.1, (0.6, -0.4))
    h = build_spin_ring(spec)
    rho = noisy_vha_state(spec, VhaParams([0.5], [0.7]), hardware_noise(0.01))
    clean = energy_with_esd(rho, h, 2).energy
    nm = hardware_noise(0.005)
    noisy = energy_with_esd(rho, h, 2, derangement_noise=nm).energy
    zne = energy_with_esd_zne(rho, h, 2, nm, np.linspace(1, 2, 6), degree=3)
    assert abs(zne - clean) < abs(noisy - clean) / 10
