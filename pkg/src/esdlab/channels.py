"""Kraus channels and the tensor kernels that apply operators to density matrices."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .states import pauli_matrix, qubit_count_of


@dataclass(frozen=True)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators.

    ``family``/``prob`` record the channel's origin so that depolarizing,
    dephasing and damping can use closed-form kernels instead of summing
    Kraus terms.
    """

    operators: tuple[np.ndarray, ...]
    arity: int
    family: str = "kraus"
    prob: float = 0.0

    def __post_init__(self):
        d = 1 << self.arity
        total = np.zeros((d, d), dtype=np.complex128)
        for k in self.operators:
            if k.shape != (d, d):
                raise ValueError(f"Kraus operator shape {k.shape} does not match arity {self.arity}")
            total += k.conj().T @ k
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise ValueError("Kraus operators are not trace preserving")

    def completeness_error(self) -> float:
        d = 1 << self.arity
        total = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(total - np.eye(d))))


def _check_prob(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    return float(p)


def depolarizing_channel(k_qubits: int, p: float) -> KrausChannel:
    """``rho -> (1-p) rho + p tr_k[rho] (x) Id/2^k`` as a uniform Pauli mixture."""
    p = _check_prob(p)
    if not 1 <= k_qubits <= 3:
        raise ValueError("depolarizing channel supports 1 to 3 qubits")
    n_paulis = 4 ** k_qubits
    ops = []
    for letters in itertools.product("IXYZ", repeat=k_qubits):
        m = np.ones((1, 1), dtype=np.complex128)
        for c in letters:
            m = np.kron(m, pauli_matrix(c))
        if set(letters) == {"I"}:
            w = 1 - p * (n_paulis - 1) / n_paulis
        else:
            w = p / n_paulis
        ops.append(np.sqrt(w) * m)
    return KrausChannel(tuple(ops), k_qubits, "depolarizing", p)


def dephasing_channel(p: float) -> KrausChannel:
    """Z applied with probability ``p``."""
    p = _check_prob(p)
    ops = (np.sqrt(1 - p) * pauli_matrix("I"), np.sqrt(p) * pauli_matrix("Z"))
    return KrausChannel(ops, 1, "dephasing", p)


def damping_channel(p: float) -> KrausChannel:
    """Amplitude damping with decay probability ``p``."""
    p = _check_prob(p)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=np.complex128)
    k1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=np.complex128)
    return KrausChannel((k0, k1), 1, "damping", p)


# -- kernels -----------------------------------------------------------------

def _left(t: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    opt = op.reshape((2,) * (2 * k))
    out = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _sandwich_1q(rho: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    # batched 2x2 products on row then column index; no transposes needed
    d = rho.shape[0]
    a, b = 1 << q, 1 << (n - 1 - q)
    out = np.matmul(u, rho.reshape(a, 2, b * d)).reshape(d, d)
    return np.matmul(u.conj(), out.reshape(d * a, 2, b)).reshape(d, d)


def apply_unitary(rho: np.ndarray, u: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """``U rho U^dag`` with ``U`` acting on ``qubits`` (first = most significant)."""
    n = qubit_count_of(rho)
    _check_qubits(qubits, n)
    d = rho.shape[0]
    if len(qubits) == 1:
        return _sandwich_1q(rho, np.asarray(u, dtype=np.complex128), qubits[0], n)
    t = rho.reshape((2,) * (2 * n))
    t = _left(t, u, qubits)
    t = _left(t, u.conj(), [n + q for q in qubits])
    return t.reshape(d, d)


def apply_monomial(rho: np.ndarray, perm: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """``M rho M^dag`` for ``M|j> = phase[j] |perm[j]>`` on the full space."""
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    ph = phase[inv]
    out = rho[np.ix_(inv, inv)]
    out *= ph[:, None]
    out *= ph.conj()[None, :]
    return out


def apply_diagonal(rho: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return rho * np.outer(diag, diag.conj())


def _check_qubits(qubits: Sequence[int], n: int) -> None:
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit index in {list(qubits)}")
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")


def bit_signs(n: int, q: int) -> np.ndarray:
    """(-1)^bit for qubit ``q`` over the computational basis."""
    j = np.arange(1 << n)
    return 1.0 - 2.0 * ((j >> (n - 1 - q)) & 1)


def _depolarize(rho: np.ndarray, p: float, qubits: Sequence[int]) -> np.ndarray:
    # partial trace over ``qubits`` by slicing, then spread it over the diagonal blocks
    n = qubit_count_of(rho)
    k = len(qubits)
    t = rho.reshape((2,) * (2 * n))

    def block(bits):
        sel = [slice(None)] * (2 * n)
        for q, bit in zip(qubits, bits):
            sel[q] = sel[n + q] = bit
        return tuple(sel)

    patterns = list(itertools.product((0, 1), repeat=k))
    reduced = sum(t[block(b)] for b in patterns)
    out = (1 - p) * t
    for b in patterns:
        out[block(b)] += (p / (1 << k)) * reduced
    return out.reshape(rho.shape)


def apply_channel(rho: np.ndarray, ch: KrausChannel, qubits: Sequence[int]) -> np.ndarray:
    """``sum_m K_m rho K_m^dag`` with the Kraus operators embedded on ``qubits``."""
    n = qubit_count_of(rho)
    if len(qubits) != ch.arity:
        raise ValueError(f"channel arity {ch.arity} does not match {len(qubits)} qubits")
    _check_qubits(qubits, n)
    if ch.family == "depolarizing":
        return _depolarize(rho, ch.prob, qubits) if ch.prob else rho
    if ch.family == "dephasing":
        if not ch.prob:
            return rho
        q = qubits[0]
        out = rho.reshape(1 << q, 2, -1, 1 << q, 2, 1 << (n - 1 - q)).copy()
        out[:, 0, :, :, 1, :] *= 1 - 2 * ch.prob
        out[:, 1, :, :, 0, :] *= 1 - 2 * ch.prob
        return out.reshape(rho.shape)
    if ch.family == "damping":
        return _damp(rho, ch.prob, qubits[0], n) if ch.prob else rho
    out = np.zeros_like(rho)
    for k in ch.operators:
        out += apply_unitary(rho, k, qubits)
    return out


def _damp(rho: np.ndarray, p: float, q: int, n: int) -> np.ndarray:
    a, b = 1 << q, 1 << (n - 1 - q)
    t = rho.reshape(a, 2, b, a, 2, b)
    out = t.copy()
    s = np.sqrt(1 - p)
    out[:, 0, :, :, 1, :] *= s
    out[:, 1, :, :, 0, :] *= s
    out[:, 1, :, :, 1, :] *= 1 - p
    out[:, 0, :, :, 0, :] += p * t[:, 1, :, :, 1, :]
    return out.reshape(rho.shape)


def apply_kraus_generic(rho: np.ndarray, ch: KrausChannel, qubits: Sequence[int]) -> np.ndarray:
    """Kraus-sum application without closed-form shortcuts (reference path)."""
    out = np.zeros_like(rho)
    for k in ch.operators:
        out += apply_unitary(rho, k, qubits)
    return out


def embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix of ``op`` acting on ``qubits``."""
    d = 1 << n
    eye = np.eye(d, dtype=np.complex128).reshape((2,) * (2 * n))
    return _left(eye, op, qubits).reshape(d, d)
