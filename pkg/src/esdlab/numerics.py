"""Dense complex linear algebra shared by the rest of the package."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""

    def __init__(self, deviation: float):
        super().__init__(f"matrix is not Hermitian: max|A - A^dag| / max|A| = {deviation:.3e}")
        self.deviation = deviation


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    return m


def kron(*ms) -> np.ndarray:
    """Tensor product of one or more matrices, left factor most significant."""
    if not ms:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (as_matrix(m) for m in ms))


def hermitian_deviation(h: np.ndarray) -> float:
    scale = float(np.max(np.abs(h))) or 1.0
    return float(np.max(np.abs(h - h.conj().T))) / scale


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude component real positive; argmax picks lowest index on ties
    idx = np.argmax(np.abs(vecs) > np.max(np.abs(vecs), axis=0) * (1 - 1e-12), axis=0)
    cols = np.arange(vecs.shape[1])
    pivots = vecs[idx, cols]
    return vecs * (np.abs(pivots) / pivots)


def hermitian_eig(h, tol: float = HERMITIAN_TOL) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Each eigenvector is phase fixed so that its largest-magnitude entry is real
    and positive. Eigenvalues closer than 1e-12 are ordered by their vectors'
    first differing component, which is not stable under perturbation.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"hermitian_eig needs a square matrix, got {h.shape}")
    dev = hermitian_deviation(h)
    if dev > tol:
        raise NotHermitianError(dev)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    w = w[::-1]
    v = _fix_phase(v[:, ::-1])
    order = _degenerate_order(w, v)
    return Spectrum(w[order], v[:, order])


def _degenerate_order(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    order = list(range(len(w)))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[start] - w[stop] < 1e-12:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            block.sort(key=lambda j: tuple(np.round(np.abs(v[:, j]), 12) * -1))
            order[start:stop] = block
        start = stop
    return np.asarray(order)


def product_trace(ms: Sequence) -> complex:
    """tr(m1 m2 ... mk) without forming the full product for k > 2."""
    if len(ms) == 0:
        raise ValueError("product_trace needs at least one matrix")
    mats = [as_matrix(m) for m in ms]
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise ValueError(f"dimension mismatch: expected {(d, d)}, got {m.shape}")
    if len(mats) == 1:
        return complex(np.trace(mats[0]))
    acc = mats[0]
    for m in mats[1:-1]:
        acc = acc @ m
    # tr(A B) = sum_ij A_ij B_ji
    return complex(np.sum(acc * mats[-1].T))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
