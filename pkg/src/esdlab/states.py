"""Density matrices, Pauli observables and spectral analysis of noisy states.

A noisy state is decomposed as ``rho = lam |psi><psi| + (1 - lam) sum_k p_k |psi_k><psi_k|``
with ``lam`` the dominant eigenvalue and ``p`` the normalized error distribution.
Density matrices are plain ``numpy`` arrays; qubit 0 is the most significant
tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .numerics import as_matrix, hermitian_deviation, hermitian_eig, random_unitary

PAULI_LETTERS = "IXYZ"

_PAULI_1Q = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

DROP_EIGENVALUE = 1e-12


def pauli_matrix(letter: str) -> np.ndarray:
    return _PAULI_1Q[letter].copy()


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``"XIZY"`` (left = qubit 0)."""

    letters: str

    def __post_init__(self):
        letters = self.letters.upper()
        if not letters or any(c not in PAULI_LETTERS for c in letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls("I" * n_qubits)

    @property
    def qubit_count(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def __str__(self) -> str:
        return self.letters

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=np.complex128)
        for c in self.letters:
            out = np.kron(out, _PAULI_1Q[c])
        return out

    @cached_property
    def _masks(self) -> tuple[int, int, int]:
        n = len(self.letters)
        x = z = ny = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                x |= bit
            if c in "ZY":
                z |= bit
            if c == "Y":
                ny += 1
        return x, z, ny

    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(perm, phase)`` with ``P|j> = phase[j] |perm[j]>``."""
        x, z, ny = self._masks
        j = np.arange(1 << self.qubit_count)
        parity = _popcount(j & z) & 1
        phase = (1j ** ny) * (1 - 2 * parity)
        return j ^ x, phase.astype(np.complex128)


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64)
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a = a >> 1
    return count


@dataclass(frozen=True)
class ObservableSum:
    """Real linear combination of Pauli strings."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        terms = tuple((float(c), p if isinstance(p, PauliString) else PauliString(p)) for c, p in self.terms)
        if not terms:
            raise ValueError("ObservableSum needs at least one term")
        sizes = {p.qubit_count for _, p in terms}
        if len(sizes) != 1:
            raise ValueError(f"terms act on different qubit counts: {sorted(sizes)}")
        if not all(math.isfinite(c) for c, _ in terms):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "terms", terms)

    @property
    def qubit_count(self) -> int:
        return self.terms[0][1].qubit_count

    def matrix(self) -> np.ndarray:
        return sum(c * p.matrix() for c, p in self.terms)

    def to_text(self) -> str:
        return "".join(f"{c!r}\t{p}\n" for c, p in self.terms)

    @classmethod
    def from_text(cls, text: str) -> "ObservableSum":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            coeff, letters = line.split()
            terms.append((float(coeff), PauliString(letters)))
        return cls(tuple(terms))


def qubit_count_of(rho: np.ndarray) -> int:
    d = rho.shape[0]
    n = d.bit_length() - 1
    if rho.shape != (d, d) or (1 << n) != d:
        raise ValueError(f"density matrix must be 2^N x 2^N, got {rho.shape}")
    return n


def check_density_matrix(rho, tol: float = 1e-10) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; returns the array."""
    rho = as_matrix(rho)
    qubit_count_of(rho)
    if hermitian_deviation(rho) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.12f}, expected 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def basis_state(bits: str) -> np.ndarray:
    """Density matrix of the computational basis state ``|bits>``."""
    d = 1 << len(bits)
    rho = np.zeros((d, d), dtype=np.complex128)
    i = int(bits, 2)
    rho[i, i] = 1
    return rho


def maximally_mixed(n_qubits: int) -> np.ndarray:
    d = 1 << n_qubits
    return np.eye(d, dtype=np.complex128) / d


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre matrix of the given rank (full rank by default)."""
    d = 1 << n_qubits
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    d = 1 << n_qubits
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)


def state_from_spectrum(eigenvalues: Sequence[float], rng: np.random.Generator | None = None,
                        basis: np.ndarray | None = None) -> np.ndarray:
    """Density matrix ``V diag(e) V^dag`` with ``V`` random (or the given basis)."""
    e = np.asarray(eigenvalues, dtype=float)
    d = len(e)
    if basis is None:
        basis = random_unitary(d, rng or np.random.default_rng())
    return (basis * e) @ basis.conj().T


def random_pauli_strings(n_qubits: int, count: int, rng: np.random.Generator,
                         include_identity: bool = False) -> list[PauliString]:
    """Uniformly sampled Pauli strings (with replacement)."""
    out = []
    while len(out) < count:
        letters = "".join(PAULI_LETTERS[i] for i in rng.integers(0, 4, n_qubits))
        if not include_identity and set(letters) == {"I"}:
            continue
        out.append(PauliString(letters))
    return out


def pauli_expectation(rho: np.ndarray, pauli: PauliString) -> complex:
    """tr[rho P] in O(d) using the permutation-with-phase form of P."""
    perm, phase = pauli.action()
    j = np.arange(len(perm))
    return complex(np.sum(rho[j, perm] * phase))


def expectation(rho, obs: ObservableSum | PauliString) -> float:
    """Real part of tr[rho O]; the imaginary residue must be below 1e-10."""
    rho = np.asarray(rho)
    n = qubit_count_of(rho)
    terms = [(1.0, obs)] if isinstance(obs, PauliString) else obs.terms
    total = 0j
    for c, p in terms:
        if p.qubit_count != n:
            raise ValueError(f"observable acts on {p.qubit_count} qubits, state has {n}")
        total += c * pauli_expectation(rho, p)
    if abs(total.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {total.imag:.3e}")
    return total.real


def renyi_entropy(p: Sequence[float], n: float) -> float:
    """Renyi entropy ``ln(sum p^n) / (1 - n)``; ``n = inf`` gives ``-ln max p``.

    An empty distribution has no error support and is assigned ``+inf``.
    """
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return math.inf
    if np.any(p < -1e-15) or abs(p.sum() - 1) > 1e-10:
        raise ValueError("p must be a normalized non-negative distribution")
    p = p[p > 0]
    if math.isinf(n):
        return float(-np.log(p.max()))
    if n == 1:
        return float(-np.sum(p * np.log(p)))
    if n < 1:
        raise ValueError("Renyi order must be >= 1 or inf")
    return float(np.log(np.sum(p ** n)) / (1 - n))


@dataclass
class SpectralData:
    """Dominant eigenpair and normalized error distribution of a state."""

    lam: float
    dominant_vector: np.ndarray
    error_probs: np.ndarray
    renyi: dict = field(default_factory=dict)
    purity_powers: dict = field(default_factory=dict)
    dominant: bool = True
    gap: float = 0.0
    error_vectors: np.ndarray | None = None

    @property
    def p_max(self) -> float:
        return float(self.error_probs[0]) if self.error_probs.size else 0.0

    def reconstruct(self) -> np.ndarray:
        psi = self.dominant_vector
        rho = self.lam * np.outer(psi, psi.conj())
        if self.error_vectors is not None and self.error_probs.size:
            v = self.error_vectors
            rho = rho + (1 - self.lam) * (v * self.error_probs) @ v.conj().T
        return rho


def spectral_data(rho, orders: Iterable[float] = (2, 3, 4, math.inf), keep_vectors: bool = False) -> SpectralData:
    """Split the spectrum of ``rho`` into the dominant eigenpair and error distribution.

    Eigenvalues below 1e-12 are dropped from the error support. A dominant
    eigenvalue that is not strictly largest is flagged via ``dominant=False``.
    """
    spec = hermitian_eig(np.asarray(rho, dtype=np.complex128), tol=1e-10)
    w = np.clip(spec.eigenvalues, 0.0, None)
    lam = float(w[0])
    rest = w[1:]
    support = rest > DROP_EIGENVALUE
    weights = rest[support]
    total = weights.sum()
    probs = weights / total if total > 0 else np.zeros(0)
    gap = float(lam - rest[0]) if rest.size else lam
    orders = list(orders)
    return SpectralData(
        lam=lam,
        dominant_vector=spec.eigenvectors[:, 0],
        error_probs=probs,
        renyi={n: renyi_entropy(probs, n) for n in orders},
        purity_powers={n: float(np.sum(w ** n)) for n in orders if not math.isinf(n)},
        dominant=gap > 1e-12,
        gap=gap,
        error_vectors=spec.eigenvectors[:, 1:][:, support] if keep_vectors else None,
    )


@dataclass(frozen=True)
class Mismatch:
    c: float
    degenerate: bool


def coherent_mismatch(rho, psi_id) -> Mismatch:
    """Infidelity ``1 - |<psi_id|psi_1>|^2`` of the dominant eigenvector."""
    psi_id = np.asarray(psi_id, dtype=np.complex128).ravel()
    if abs(np.linalg.norm(psi_id) - 1) > 1e-10:
        raise ValueError("psi_id must be normalized")
    spec = hermitian_eig(np.asarray(rho, dtype=np.complex128), tol=1e-10)
    w = spec.eigenvalues
    degenerate = len(w) > 1 and w[0] - w[1] < 1e-12
    overlap = abs(np.vdot(psi_id, spec.eigenvectors[:, 0])) ** 2
    return Mismatch(float(min(1.0, max(0.0, 1 - overlap))), bool(degenerate))


def vector_expectation(psi: np.ndarray, obs: ObservableSum | PauliString) -> float:
    """<psi|O|psi> for a state vector."""
    terms = [(1.0, obs)] if isinstance(obs, PauliString) else obs.terms
    total = 0j
    for c, p in terms:
        perm, phase = p.action()
        total += c * np.sum(psi[perm].conj() * phase * psi)
    return total.real
