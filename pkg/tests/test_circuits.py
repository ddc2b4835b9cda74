from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esdlab.channels import embed
from esdlab.circuits import (
    Circuit,
    Gate,
    NoiseEntry,
    NoiseModel,
    alternating_param_count,
    ansatz_noise,
    apply_gate,
    build_alternating_ansatz,
    gate_error_probability,
    hardware_noise,
    merge_single_qubit_gates,
    run_circuit,
    run_pure,
)
from esdlab.states import basis_state, pure_state, random_density_matrix

ALL_GATES = [
    Gate("Rx", (0,), (0.3,)), Gate("Ry", (1,), (1.1,)), Gate("Rz", (2,), (-0.4,)), Gate("H", (0,)),
    Gate("X", (1,)), Gate("Y", (2,)), Gate("Z", (0,)), Gate("XX", (0, 2), (0.7,)), Gate("YY", (1, 0), (0.2,)),
    Gate("ZZ", (2, 1), (0.9,)), Gate("pSWAP", (0, 1), (0.5, -0.8)), Gate("SWAP", (2, 0)),
    Gate("CRx", (1, 2), (0.6,)), Gate("CRz", (2, 0), (1.4,)), Gate("CSWAP", (1, 0, 2)),
    Gate("CCP", (2, 1, 0)), Gate("XXX", (0, 1, 2), (0.35,)),
    Gate("CPauli", (0, 1, 2), pauli="YZ"), Gate("ACPauli", (2, 0), pauli="X"),
]


def test_zero_ansatz_noise(rng):
    rho = random_density_matrix(3, rng)
    c = build_alternating_ansatz(3, 2, seed=1)
    assert np.allclose(run_circuit(rho, c, ansatz_noise(0, 0)), run_circuit(rho, c))


@pytest.mark.parametrize("gate", ALL_GATES, ids=lambda g: g.kind)
def test_gate_kernels_match_embedded_matrix(gate, rng):
    rho = random_density_matrix(3, rng)
    u = embed(gate.matrix(), gate.qubits, 3)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)
    assert np.max(np.abs(apply_gate(rho, gate) - u @ rho @ u.conj().T)) < 1e-12


def test_gate_conventions():
    assert np.allclose(Gate("XX", (0, 1), (math.pi / 2,)).matrix(), -1j * np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]]))
    assert np.allclose(Gate("Rz", (0,), (math.pi,)).matrix(), np.diag([-1j, 1j]))
    swap = Gate("SWAP", (0, 1)).matrix()
    # pSWAP(pi/2, 0) swaps |01> and |10> with a phase
    assert np.allclose(np.abs(Gate("pSWAP", (0, 1), (math.pi / 2, 0)).matrix()), np.abs(swap))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("FOO", (0,))
    with pytest.raises(ValueError):
        Gate("XX", (0,), (0.1,))
    with pytest.raises(ValueError):
        Gate("Rx", (0,))
    with pytest.raises(ValueError):
        Gate("CSWAP", (0, 1, 1))
    with pytest.raises(ValueError):
        Gate("CPauli", (0, 1), pauli="XY")
    with pytest.raises(ValueError):
        Circuit(2, [Gate("X", (2,))])


def test_text_round_trip():
    c = Circuit(3, [g for g in ALL_GATES])
    back = Circuit.from_text(c.to_text())
    assert back.qubit_count == 3
    assert back.gates == c.gates
    assert np.allclose(back.unitary(), c.unitary())


def test_noiseless_x_flip():
    out = run_circuit(basis_state("0"), Circuit(1, [Gate("X", (0,))]))
    assert np.allclose(out, basis_state("1"))


def test_eps_scale_zero_is_noiseless(rng):
    rho = random_density_matrix(3, rng)
    c = build_alternating_ansatz(3, 2, seed=3)
    for nm in (ansatz_noise(0.05, 0.01), hardware_noise(0.01)):
        noisy = run_circuit(rho, c, nm, eps_scale=0.0)
        if nm.classes["1q"][-1].amplifiable:
            assert np.max(np.abs(noisy - run_circuit(rho, c))) < 1e-12


def test_purity_non_increasing_under_unital_noise(rng):
    rho = pure_state(np.eye(8)[0])
    nm = NoiseModel({"1q": [NoiseEntry("dephasing", 0.02)], "2q": [NoiseEntry("depolarizing", 0.03)]})
    purity = 1.0
    for g in build_alternating_ansatz(3, 3, seed=5).gates:
        rho = run_circuit(rho, Circuit(3, [g]), nm)
        p = float(np.real(np.trace(rho @ rho)))
        assert p <= purity + 1e-12
        purity = p


def test_alternating_ansatz_counts():
    assert len(build_alternating_ansatz(12, 10, seed=0)) == 372
    assert len(build_alternating_ansatz(8, 2, seed=0)) == 56
    zero = build_alternating_ansatz(4, 0, seed=0)
    assert len(zero) == 4 and all(g.kind == "Ry" for g in zero.gates)
    assert alternating_param_count(8, 2) == 56
    with pytest.raises(ValueError):
        build_alternating_ansatz(2, 1, params=[0.1])


def test_trace_preserved_over_long_circuit(rng):
    rho = random_density_matrix(3, rng)
    c = build_alternating_ansatz(3, 111, seed=2)
    assert len(c) >= 1000
    out = run_circuit(rho, c, hardware_noise(0.005))
    assert abs(np.trace(out) - 1) <= 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_composition_law(seed):
    r = np.random.default_rng(seed)
    rho = random_density_matrix(3, r)
    a = build_alternating_ansatz(3, 1, seed=int(r.integers(1000)))
    b = build_alternating_ansatz(3, 1, seed=int(r.integers(1000)), entangler="XX")
    nm = hardware_noise(0.01)
    whole = run_circuit(rho, a + b, nm)
    stepwise = run_circuit(run_circuit(rho, a, nm), b, nm)
    assert np.max(np.abs(whole - stepwise)) < 1e-10


def test_noiseless_pure_stays_pure_and_matches_run_pure(rng):
    psi0 = np.zeros(16, dtype=complex)
    psi0[0] = 1
    c = Circuit(4, build_alternating_ansatz(4, 2, seed=9).gates + [Gate("CSWAP", (0, 2, 3)), Gate("XXX", (1, 2, 3), (0.4,))])
    rho = run_circuit(pure_state(psi0), c)
    assert abs(np.trace(rho @ rho).real - 1) < 1e-9
    assert np.allclose(rho, pure_state(run_pure(psi0, c)), atol=1e-12)


def test_hardware_noise_amplification():
    nm = hardware_noise(0.001)
    amp = nm.amplify(3).effective()
    base = nm.effective()
    for key in ("1q", "2q"):
        fam = {e.family: e.prob for e in amp[key]}
        ref = {e.family: e.prob for e in base[key]}
        assert fam["dephasing"] == pytest.approx(3 * ref["dephasing"])
        assert fam["damping"] == pytest.approx(3 * ref["damping"])
        assert fam["depolarizing"] == ref["depolarizing"]
    assert base["1q"][2].prob == pytest.approx(0.07 * 0.001)
    assert nm.amplify(1).effective() == base
    with pytest.raises(ValueError):
        hardware_noise(0.3).amplify(2).effective()


def test_noise_model_dict_round_trip():
    nm = hardware_noise(0.002)
    assert NoiseModel.from_dict(nm.to_dict()).effective() == nm.effective()
    with pytest.raises(ValueError):
        NoiseEntry("bitflip", 0.1)


def test_expected_errors_sum():
    c = Circuit(2, [Gate("H", (0,)), Gate("XX", (0, 1), (0.1,)), Gate("Rz", (1,), (0.2,))])
    nm = ansatz_noise(0.01, 0.001)
    assert c.expected_errors(nm) == pytest.approx(0.01 + 2 * 0.001)
    assert gate_error_probability([NoiseEntry("dephasing", 0.1)], 2) == pytest.approx(1 - 0.81)
    assert c.noisy_gate_count(nm) == 3


def test_merge_single_qubit_gates_keeps_unitary():
    c = build_alternating_ansatz(3, 2, seed=4, entangler="XX")
    merged = merge_single_qubit_gates(c)
    assert len(merged) < len(c)
    assert merged.count(entangling=True) == c.count(entangling=True)
    assert np.allclose(merged.unitary(), c.unitary(), atol=1e-12)
