"""Spin-ring Hamiltonian, the variational Hamiltonian ansatz and ESD energy estimates.

The ring Hamiltonian is ``sum_k w_k Z_k + J sum_ring (XX + YY + ZZ)``. The
ansatz starts from the ground state of the field part and alternates
``A(g) = exp(-i g H_couple)`` (one gate per coupling term) and
``B(b) = exp(-i b H_field)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import Circuit, Gate, NoiseModel, run_circuit, run_pure
from .derangement import (
    EsdCircuitSpec,
    prob0_circuit,
    prob0_fast,
)
from .estimator import method_a, method_b
from .states import ObservableSum, PauliString, pauli_expectation, pure_state
from .zne import fit_series, NoiseScaleSeries

REFERENCE_OMEGA_6 = (-0.70983, -0.0517, 0.9065, -0.9265, 0.0950, -0.49597)


@dataclass(frozen=True)
class SpinRingSpec:
    N: int
    J: float
    omega: tuple[float, ...]

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("a spin ring needs at least 2 sites")
        omega = tuple(float(w) for w in self.omega)
        if len(omega) != self.N or not all(math.isfinite(w) for w in omega):
            raise ValueError(f"omega must hold {self.N} finite values")
        object.__setattr__(self, "omega", omega)

    @classmethod
    def from_seed(cls, N: int, J: float, seed: int) -> "SpinRingSpec":
        """On-site strengths uniform in [-1, 1]."""
        return cls(N, J, tuple(np.random.default_rng(seed).uniform(-1, 1, N)))

    @classmethod
    def from_config(cls, d: dict) -> "SpinRingSpec":
        omega = d.get("omega")
        N, J = int(d["N"]), float(d.get("J", 0.1))
        if isinstance(omega, str) and omega.startswith("seed:"):
            return cls.from_seed(N, J, int(omega.split(":", 1)[1]))
        if omega is None:
            if N == 6:
                return cls(N, J, REFERENCE_OMEGA_6)
            raise ValueError("omega must be given for N != 6")
        return cls(N, J, tuple(omega))

    def edges(self) -> list[tuple[int, int]]:
        if self.N == 2:
            return [(0, 1)]
        return [(k, (k + 1) % self.N) for k in range(self.N)]


def _two_site(n: int, a: int, b: int, letter: str) -> PauliString:
    s = ["I"] * n
    s[a] = s[b] = letter
    return PauliString("".join(s))


def build_spin_ring(spec: SpinRingSpec) -> ObservableSum:
    terms = []
    for k, w in enumerate(spec.omega):
        s = ["I"] * spec.N
        s[k] = "Z"
        terms.append((w, PauliString("".join(s))))
    for a, b in spec.edges():
        for letter in "XYZ":
            terms.append((spec.J, _two_site(spec.N, a, b, letter)))
    return ObservableSum(tuple(terms))


def exact_ground_energy(h: ObservableSum) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(h.matrix())
    return float(w[0]), v[:, 0]


@dataclass
class VhaParams:
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.beta.shape != self.gamma.shape or self.beta.ndim != 1:
            raise ValueError("beta and gamma must be equal-length sequences")

    @property
    def layers(self) -> int:
        return len(self.beta)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "VhaParams":
        l = len(x) // 2
        return cls(x[:l], x[l:])

    @classmethod
    def adiabatic(cls, layers: int, total_time: float | None = None) -> "VhaParams":
        """Trotterized ramp ``H0 + s H1`` with ``s`` rising linearly over ``total_time``."""
        t = float(layers) if total_time is None else total_time
        dt = t / layers
        s = (np.arange(layers) + 0.5) / layers
        return cls(np.full(layers, dt), s * dt)


def initial_bits(spec: SpinRingSpec) -> str:
    """Ground state of the field part: ``|1>`` where ``w_k > 0``."""
    return "".join("1" if w > 0 else "0" for w in spec.omega)


_HALF_PI = math.pi / 2


def _coupling_gates(a: int, b: int, letter: str, theta: float, native: bool) -> list[Gate]:
    if letter == "X" or not native:
        return [Gate(letter * 2, (a, b), (theta,))]
    # rotate X to Y with Rz(pi/2) or to Z with Ry(pi/2): U XX U^dag
    kind = "Rz" if letter == "Y" else "Ry"
    pre = [Gate(kind, (q,), (-_HALF_PI,)) for q in (a, b)]
    post = [Gate(kind, (q,), (_HALF_PI,)) for q in (a, b)]
    return pre + [Gate("XX", (a, b), (theta,))] + post


def build_vha(spec: SpinRingSpec, params: VhaParams, native: bool = True,
              prepare_initial: bool = True) -> Circuit:
    """VHA circuit acting on ``|0...0>``.

    ``native`` writes YY and ZZ as basis-rotated XX gates; otherwise the YY/ZZ
    kinds are used directly. ``prepare_initial`` adds X gates for the field
    ground state.
    """
    c = Circuit(spec.N)
    if prepare_initial:
        c.extend(Gate("X", (q,)) for q, bit in enumerate(initial_bits(spec)) if bit == "1")
    for b, g in zip(params.beta, params.gamma):
        for e0, e1 in spec.edges():
            for letter in "XYZ":
                c.extend(_coupling_gates(e0, e1, letter, g * spec.J, native))
        c.extend(Gate("Rz", (q,), (2 * b * w,)) for q, w in enumerate(spec.omega))
    return c


def vha_state(spec: SpinRingSpec, params: VhaParams) -> np.ndarray:
    psi0 = np.zeros(1 << spec.N, dtype=np.complex128)
    psi0[0] = 1
    return run_pure(psi0, build_vha(spec, params, native=False))


def vha_energy(spec: SpinRingSpec, params: VhaParams, hmat: np.ndarray | None = None) -> float:
    if hmat is None:
        hmat = build_spin_ring(spec).matrix()
    psi = vha_state(spec, params)
    return float(np.real(np.vdot(psi, hmat @ psi)))


@dataclass
class OptimizerConfig:
    iterations: int = 300
    step: float = 0.5
    fd_step: float = 1e-5
    shrink: float = 0.5
    grow: float = 1.5
    armijo: float = 1e-4
    init_noise: float = 0.05
    tol: float = 1e-12


@dataclass
class OptimizationResult:
    params: VhaParams
    trajectory: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def energy(self) -> float:
        return self.trajectory[-1]


def optimize_vha(spec: SpinRingSpec, layers: int, config: OptimizerConfig | None = None,
                 seed: int = 0, initial: VhaParams | None = None) -> OptimizationResult:
    """Gradient descent with central finite differences and backtracking.

    Starts near the adiabatic ramp. A step is accepted only if it satisfies the
    Armijo condition, so the recorded energies never increase.
    """
    cfg = config or OptimizerConfig()
    hmat = build_spin_ring(spec).matrix()
    if initial is None:
        rng = np.random.default_rng(seed)
        x = VhaParams.adiabatic(layers).vector() + cfg.init_noise * rng.standard_normal(2 * layers)
    else:
        x = initial.vector().copy()
    energy = lambda v: vha_energy(spec, VhaParams.from_vector(v), hmat)
    e = energy(x)
    traj = [e]
    step = cfg.step
    converged = False
    for _ in range(cfg.iterations):
        grad = np.empty_like(x)
        for i in range(len(x)):
            d = np.zeros_like(x)
            d[i] = cfg.fd_step
            grad[i] = (energy(x + d) - energy(x - d)) / (2 * cfg.fd_step)
        g2 = float(grad @ grad)
        if g2 < cfg.tol ** 2:
            converged = True
            break
        while step > 1e-12:
            trial = x - step * grad
            et = energy(trial)
            if et <= e - cfg.armijo * step * g2:
                break
            step *= cfg.shrink
        else:
            converged = True
            break
        improvement = e - et
        x, e = trial, et
        traj.append(e)
        step *= cfg.grow
        if improvement < cfg.tol:
            converged = True
            break
    return OptimizationResult(VhaParams.from_vector(x), traj, converged)


# -- ESD energies ----------------------------------------------------------------

def _plain_prob0(rho: np.ndarray, sigma: PauliString | None) -> float:
    v = 1.0 if sigma is None else float(np.real(pauli_expectation(rho, sigma)))
    return 0.5 + 0.5 * v


@dataclass
class EsdEnergy:
    energy: float
    prob0_prime: float
    term_values: list[float]


def energy_with_esd(copies: Sequence[np.ndarray], h: ObservableSum, n: int | None = None,
                    method: str = "A", lam: float | None = None,
                    derangement_noise: NoiseModel | None = None, eps_scale: float = 1.0,
                    cswap=None) -> EsdEnergy:
    """``sum_k c_k <P_k>_ESD`` with the derangement on ``n`` copies.

    ``copies`` may be a single matrix (identical copies) or a list of ``n``.
    Without derangement noise the fast spectral backend is used; otherwise
    each Pauli term runs the full noisy circuit.
    """
    if isinstance(copies, np.ndarray) and copies.ndim == 2:
        if n is None:
            raise ValueError("n is required for a single density matrix")
        copies = [copies] * n
    copies = list(copies)
    n = len(copies)
    N = h.qubit_count

    def prob0(sigma: PauliString | None) -> float:
        if n == 1:
            return _plain_prob0(copies[0], sigma)
        include = sigma is not None
        if derangement_noise is None:
            return prob0_fast(copies, sigma, include)
        spec = EsdCircuitSpec(n, N, sigma if include else PauliString.identity(N), include_observable=include)
        return prob0_circuit(copies, spec, derangement_noise, eps_scale, cswap=cswap)

    p_prime = prob0(None)
    total, values = 0.0, []
    for c, p in h.terms:
        if p.is_identity:
            values.append(1.0)
            total += c
            continue
        p0 = prob0(p)
        if method.upper() == "A":
            v = method_a(p0, p_prime)
        else:
            if lam is None:
                raise ValueError("method B needs the dominant eigenvalue")
            v = method_b(p0, lam, n)
        values.append(v)
        total += c * v
    return EsdEnergy(total, p_prime, values)


def spectral_energy(rho: np.ndarray, h: ObservableSum, n: int) -> float:
    """``tr[H rho^n] / tr[rho^n]``, the value ESD converges to with ideal derangements."""
    power = np.linalg.matrix_power(rho, n)
    return float(np.real(np.trace(h.matrix() @ power) / np.trace(power)))


def energy_with_esd_zne(copies, h: ObservableSum, n: int, derangement_noise: NoiseModel,
                        scales: Sequence[float], fit_kind: str = "poly", degree: int = 3,
                        cswap=None) -> float:
    """Extrapolate the noisy-derangement ESD energy to zero derangement noise."""
    values = [energy_with_esd(copies, h, n, derangement_noise=derangement_noise, eps_scale=s,
                              cswap=cswap).energy for s in scales]
    return fit_series(NoiseScaleSeries(np.asarray(scales), np.asarray(values)), fit_kind, degree).zero_noise_value


def noisy_vha_state(spec: SpinRingSpec, params: VhaParams, nm: NoiseModel | None,
                    eps_scale: float = 1.0) -> np.ndarray:
    c = build_vha(spec, params, native=True)
    rho0 = pure_state(np.eye(1 << spec.N, dtype=np.complex128)[0])
    return run_circuit(rho0, c, nm, eps_scale)
