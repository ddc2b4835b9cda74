"""Controlled-derangement Hadamard tests on n copies of an N-qubit state.

Registers are numbered 1..n in the public API. Register ``k`` occupies qubits
``1 + (k-1) N .. k N``; qubit 0 is the ancilla. After the derangement,
register ``k`` holds the former content of register ``s(k)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import Circuit, Gate, NoiseModel, run_circuit
from .numerics import kron, product_trace
from .states import PauliString, check_density_matrix, pauli_expectation, qubit_count_of

DEFAULT_QUBIT_CAP = 13


class QubitCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class DerangementSpec:
    """An n-cycle ``s`` on registers 1..n, stored as ``perm[k-1] = s(k)``."""

    n: int
    perm: tuple[int, ...]
    transpositions: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        perm = tuple(int(x) for x in self.perm)
        object.__setattr__(self, "perm", perm)
        if self.n < 2 or len(perm) != self.n or sorted(perm) != list(range(1, self.n + 1)):
            raise ValueError(f"perm {perm} is not a permutation of 1..{self.n}")
        if any(perm[k - 1] == k for k in range(1, self.n + 1)):
            raise ValueError(f"perm {perm} has a fixed point")
        if _cycle_length(perm) != self.n:
            raise ValueError(f"perm {perm} is not a single {self.n}-cycle")
        if not self.transpositions:
            object.__setattr__(self, "transpositions", tuple(_hub_transpositions(perm)))
        if len(self.transpositions) != self.n - 1 or apply_transpositions(self.n, self.transpositions) != perm:
            raise ValueError("transpositions do not compose to perm")

    def s(self, k: int) -> int:
        return self.perm[k - 1]

    def product_order(self) -> list[int]:
        """Registers ``s(1), s^2(1), ..., s^n(1) = 1`` (order of the trace product)."""
        out, k = [], 1
        for _ in range(self.n):
            k = self.s(k)
            out.append(k)
        return out


def _cycle_length(perm: Sequence[int]) -> int:
    k, length = 1, 0
    while True:
        k = perm[k - 1]
        length += 1
        if k == 1:
            return length


def apply_transpositions(n: int, pairs: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    """Register contents after swapping ``pairs`` left to right, starting from (1..n)."""
    content = list(range(1, n + 1))
    for a, b in pairs:
        content[a - 1], content[b - 1] = content[b - 1], content[a - 1]
    return tuple(content)


def _hub_transpositions(perm: Sequence[int]) -> list[tuple[int, int]]:
    # repeatedly send the content of register 1 to where it belongs
    n = len(perm)
    where = {perm[k]: k + 1 for k in range(n)}
    content = list(range(1, n + 1))
    out = []
    while content[0] != perm[0]:
        j = where[content[0]]
        out.append((1, j))
        content[0], content[j - 1] = content[j - 1], content[0]
    return out


def variant_count(n: int) -> int:
    return math.factorial(n - 1)


def cyclic_derangement(n: int, variant_index: int = 0) -> DerangementSpec:
    """The ``variant_index``-th of the (n-1)! n-cycles; index 0 is the cyclic shift.

    The cycle ``(1 a_2 ... a_n)`` maps ``s(1) = a_2``, ``s(a_k) = a_{k+1}`` and
    ``s(a_n) = 1``; the ``a`` sequences are taken in reverse lexicographic order.
    """
    if n < 2:
        raise ValueError("a derangement needs at least 2 registers")
    count = variant_count(n)
    if not 0 <= variant_index < count:
        raise IndexError(f"variant index {variant_index} outside [0, {count})")
    tail = next(itertools.islice(
        itertools.permutations(range(n, 1, -1)), variant_index, None))
    cycle = (1,) + tail
    perm = [0] * n
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        perm[a - 1] = b
    return DerangementSpec(n, tuple(perm))


def transposition_decomposition(spec: DerangementSpec) -> list[tuple[int, int]]:
    return list(spec.transpositions)


@dataclass(frozen=True)
class EsdCircuitSpec:
    n: int
    N: int
    observable: PauliString
    variant: DerangementSpec | None = None
    include_observable: bool = True
    twirl: tuple[PauliString, ...] | None = None

    def __post_init__(self):
        if isinstance(self.observable, str):
            object.__setattr__(self, "observable", PauliString(self.observable))
        if self.variant is None:
            object.__setattr__(self, "variant", cyclic_derangement(self.n))
        if self.variant.n != self.n:
            raise ValueError("variant register count differs from n")
        if self.observable.qubit_count != self.N:
            raise ValueError(f"observable acts on {self.observable.qubit_count} qubits, registers have {self.N}")
        if self.twirl is not None:
            tw = tuple(PauliString(p) if isinstance(p, str) else p for p in self.twirl)
            if len(tw) != self.n or any(p.qubit_count != self.N for p in tw):
                raise ValueError("twirl needs one N-qubit Pauli string per register")
            object.__setattr__(self, "twirl", tw)

    @property
    def total_qubits(self) -> int:
        return self.n * self.N + 1

    def register_qubits(self, k: int) -> list[int]:
        return [1 + (k - 1) * self.N + j for j in range(self.N)]


@dataclass(frozen=True)
class NativeCswaps:
    """Recompiled 3-qubit circuits on (control, a, b) = (0, 1, 2), one per equivalence type.

    ``B`` and ``C`` omit the trailing unitary on (a, b); ``C`` implements
    ``C[X_a] CSWAP`` up to that unitary.
    """

    A: Circuit
    B: Circuit | None = None
    C: Circuit | None = None


# basis change R with R^dag X R = P, as gates applied before (after: inverse)
_TO_X = {"X": ((), ()), "Y": ((("Rz", -math.pi / 2),), (("Rz", math.pi / 2),)),
         "Z": ((("H", None),), (("H", None),))}


def _basis_gates(spec: tuple, qubits: Sequence[int]) -> list[Gate]:
    return [Gate(k, (q,), () if t is None else (t,)) for k, t in spec for q in qubits]


def _controlled_string(spec: EsdCircuitSpec, register: int, p: PauliString, anti: bool = False) -> list[Gate]:
    kind = "ACPauli" if anti else "CPauli"
    return [Gate(kind, (0, q), pauli=c) for q, c in zip(spec.register_qubits(register), p.letters) if c != "I"]


def build_esd_circuit(spec: EsdCircuitSpec, cswap: Circuit | NativeCswaps | None = None,
                      before_observable: Sequence[Gate] = ()) -> Circuit:
    """Hadamard test on the ancilla around the controlled derangement.

    ``cswap`` optionally replaces every CSWAP by a 3-qubit circuit on
    (control, a, b) = (0, 1, 2). With ``NativeCswaps``, the final swaps use
    the cheaper B form, or the C form with the observable folded in, whenever
    the leftover pair unitary cannot reach the ancilla. ``before_observable`` gates are inserted right
    before the controlled observable. With a twirl, the Pauli frame is undone
    before the controlled observable so that signs never enter the result.
    """
    c = Circuit(spec.total_qubits)
    if spec.twirl is not None:
        for k, p in enumerate(spec.twirl, start=1):
            c.extend(Gate(ch, (q,)) for q, ch in zip(spec.register_qubits(k), p.letters) if ch != "I")
    c.append(Gate("H", (0,)))
    observable = list(spec.observable.letters)
    # B/C forms leave a unitary on the swapped pair; allowed only when nothing acts on it later
    local_ok = isinstance(cswap, NativeCswaps) and spec.twirl is None and not before_observable
    last = len(spec.variant.transpositions) - 1
    for t, (a, b) in enumerate(spec.variant.transpositions):
        for j, (qa, qb) in enumerate(zip(spec.register_qubits(a), spec.register_qubits(b))):
            if cswap is None:
                c.append(Gate("CSWAP", (0, qa, qb)))
                continue
            if not isinstance(cswap, NativeCswaps):
                c.extend(g.relabel((0, qa, qb)) for g in cswap.gates)
                continue
            block = cswap.A
            letter = observable[j] if spec.include_observable and a == 1 else "I"
            if local_ok and t == last and letter == "I" and cswap.B is not None:
                block = cswap.B
            elif local_ok and t == last and letter != "I" and cswap.C is not None:
                pre, post = _TO_X[letter]
                c.extend(_basis_gates(pre, (qa, qb)))
                c.extend(g.relabel((0, qa, qb)) for g in cswap.C.gates)
                c.extend(_basis_gates(post, (qa, qb)))
                observable[j] = "I"
                continue
            c.extend(g.relabel((0, qa, qb)) for g in block.gates)
    if spec.twirl is not None:
        for k in range(1, spec.n + 1):
            c.extend(_controlled_string(spec, k, spec.twirl[k - 1], anti=True))
        for k in range(1, spec.n + 1):
            c.extend(_controlled_string(spec, k, spec.twirl[spec.variant.s(k) - 1]))
    c.extend(before_observable)
    if spec.include_observable:
        c.extend(_controlled_string(spec, 1, PauliString("".join(observable))))
    c.append(Gate("H", (0,)))
    return c


def ancilla_zero_probability(rho: np.ndarray) -> float:
    half = rho.shape[0] // 2
    return float(np.real(np.trace(rho[:half, :half])))


def initial_state(copies: Sequence[np.ndarray]) -> np.ndarray:
    anc = np.array([[1, 0], [0, 0]], dtype=np.complex128)
    return kron(anc, *copies)


def prob0_circuit(copies: Sequence[np.ndarray], spec: EsdCircuitSpec, nm: NoiseModel | None = None,
                  eps_scale: float = 1.0, cap: int = DEFAULT_QUBIT_CAP,
                  cswap: Circuit | NativeCswaps | None = None,
                  before_observable: Sequence[Gate] = ()) -> float:
    """Ancilla-0 probability from the full density-matrix simulation."""
    if len(copies) != spec.n:
        raise ValueError(f"expected {spec.n} copies, got {len(copies)}")
    for r in copies:
        check_density_matrix(r)
        if qubit_count_of(r) != spec.N:
            raise ValueError("copy size does not match the register size")
    if spec.total_qubits > cap:
        raise QubitCapExceeded(
            f"{spec.total_qubits} qubits exceed the full-circuit cap {cap}; use prob0_fast")
    circuit = build_esd_circuit(spec, cswap=cswap, before_observable=before_observable)
    out = run_circuit(initial_state(copies), circuit, nm, eps_scale)
    return ancilla_zero_probability(out)


def prob0_fast(copies: Sequence[np.ndarray], sigma: PauliString | str | None = None,
               include_observable: bool = True, variant: DerangementSpec | None = None) -> float:
    """``1/2 + 1/2 Re tr[sigma rho_s(1) rho_s^2(1) ... rho_1]`` from the copies alone."""
    n = len(copies)
    if n == 1:
        mats = [np.asarray(copies[0])]
    else:
        if variant is None:
            variant = cyclic_derangement(n)
        mats = [np.asarray(copies[k - 1]) for k in variant.product_order()]
    if include_observable and sigma is not None:
        if isinstance(sigma, str):
            sigma = PauliString(sigma)
        mats = [sigma.matrix()] + mats
    return 0.5 + 0.5 * float(np.real(product_trace(mats)))


def prob0_identical(rho: np.ndarray, n: int, sigma: PauliString | str | None = None) -> float:
    """``1/2 + 1/2 tr[rho^n sigma]`` for n identical copies."""
    power = np.linalg.matrix_power(np.asarray(rho), n)
    if sigma is None:
        return 0.5 + 0.5 * float(np.real(np.trace(power)))
    if isinstance(sigma, str):
        sigma = PauliString(sigma)
    return 0.5 + 0.5 * float(np.real(pauli_expectation(power, sigma)))
