"""Gates, noise models and noisy circuit execution on density matrices.

Angle conventions: ``Rx/Ry/Rz(t) = exp(-i t/2 P)``; ``XX/YY/ZZ(t) = exp(-i t P(x)P)``;
``XXX(t) = exp(-i t/2 X(x)X(x)X)``; ``pSWAP(t1, t2) = exp(-i t1/2 (XX+YY) - i t2/2 ZZ)``.
Controlled gates list the control qubit first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .channels import (
    KrausChannel,
    apply_channel,
    apply_diagonal,
    apply_monomial,
    apply_unitary,
    damping_channel,
    dephasing_channel,
    depolarizing_channel,
)
from .states import PauliString, pauli_matrix, qubit_count_of

I2 = np.eye(2, dtype=np.complex128)
X = pauli_matrix("X")
Y = pauli_matrix("Y")
Z = pauli_matrix("Z")
H_MAT = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
SWAP_MAT = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
P0 = np.diag([1, 0]).astype(np.complex128)
P1 = np.diag([0, 1]).astype(np.complex128)

# canonical spelling -> (arity or None for variable, number of angles)
GATE_KINDS = {
    "Rx": (1, 1), "Ry": (1, 1), "Rz": (1, 1),
    "H": (1, 0), "X": (1, 0), "Y": (1, 0), "Z": (1, 0),
    "XX": (2, 1), "YY": (2, 1), "ZZ": (2, 1), "pSWAP": (2, 2), "SWAP": (2, 0),
    "CRx": (2, 1), "CRz": (2, 1),
    "CSWAP": (3, 0), "CCP": (3, 0), "XXX": (3, 1),
    "CPauli": (None, 0), "ACPauli": (None, 0), "U": (None, 0),
}
_CANON = {k.upper(): k for k in GATE_KINDS}

MONOMIAL_KINDS = {"X", "Y", "Z", "SWAP", "CSWAP", "CCP", "CPauli", "ACPauli"}
DIAGONAL_KINDS = {"Rz", "ZZ", "CRz"}


def rot(pauli: np.ndarray, theta: float) -> np.ndarray:
    return math.cos(theta / 2) * np.eye(len(pauli)) - 1j * math.sin(theta / 2) * pauli


def controlled(u: np.ndarray, on: int = 1) -> np.ndarray:
    """Block-diagonal controlled gate; ``on=0`` gives the anti-controlled version."""
    eye = np.eye(len(u), dtype=np.complex128)
    if on:
        return np.kron(P0, eye) + np.kron(P1, u)
    return np.kron(P0, u) + np.kron(P1, eye)


@dataclass(frozen=True)
class Gate:
    """A gate on ``qubits`` with real ``params`` (radians).

    ``pauli`` holds the letters of a (anti-)controlled Pauli string, one per
    target qubit; ``matrix_override`` carries custom unitaries.
    """

    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    pauli: str = ""
    matrix_override: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        kind = _CANON.get(self.kind.upper())
        if kind is None:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(t) for t in self.params))
        arity, n_params = GATE_KINDS[kind]
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{kind} has repeated qubits {self.qubits}")
        if arity is not None and len(self.qubits) != arity:
            raise ValueError(f"{kind} acts on {arity} qubits, got {len(self.qubits)}")
        if len(self.params) != n_params:
            raise ValueError(f"{kind} takes {n_params} angles, got {len(self.params)}")
        if kind in ("CPauli", "ACPauli"):
            letters = self.pauli.upper()
            if len(letters) != len(self.qubits) - 1 or any(c not in "IXYZ" for c in letters):
                raise ValueError(f"{kind} needs one Pauli letter per target qubit")
            object.__setattr__(self, "pauli", letters)
        if kind == "U":
            if self.matrix_override is None or self.matrix_override.shape != (1 << len(self.qubits),) * 2:
                raise ValueError("custom gate needs a matrix matching its qubits")

    @property
    def arity(self) -> int:
        return len(self.qubits)

    @property
    def is_entangling(self) -> bool:
        return self.arity >= 2

    def matrix(self) -> np.ndarray:
        if self.kind == "U":
            return np.asarray(self.matrix_override, dtype=np.complex128)
        return _gate_matrix(self.kind, self.params, self.pauli, self.arity)

    def relabel(self, mapping: dict[int, int] | Sequence[int]) -> "Gate":
        return replace(self, qubits=tuple(mapping[q] for q in self.qubits))

    def to_text(self) -> str:
        if self.kind == "U":
            raise ValueError("custom unitaries have no text form")
        parts = [self.kind, ",".join(str(q) for q in self.qubits)]
        if self.pauli:
            parts.append(self.pauli)
        if self.params:
            parts.append(",".join(repr(t) for t in self.params))
        return " ".join(parts)

    @classmethod
    def from_text(cls, line: str) -> "Gate":
        tokens = line.split()
        if len(tokens) < 2:
            raise ValueError(f"cannot parse gate line {line!r}")
        kind, qubits, rest = tokens[0], tokens[1], tokens[2:]
        pauli = ""
        if _CANON.get(kind.upper()) in ("CPauli", "ACPauli"):
            pauli, rest = rest[0], rest[1:]
        params = tuple(float(t) for t in rest[0].split(",")) if rest else ()
        return cls(kind, tuple(int(q) for q in qubits.split(",")), params, pauli)


@lru_cache(maxsize=4096)
def _gate_matrix(kind: str, params: tuple[float, ...], pauli: str, arity: int) -> np.ndarray:
    t = params[0] if params else 0.0
    if kind == "Rx":
        return rot(X, t)
    if kind == "Ry":
        return rot(Y, t)
    if kind == "Rz":
        return rot(Z, t)
    if kind == "H":
        return H_MAT
    if kind in ("X", "Y", "Z"):
        return pauli_matrix(kind)
    if kind == "XX":
        return rot(np.kron(X, X), 2 * t)
    if kind == "YY":
        return rot(np.kron(Y, Y), 2 * t)
    if kind == "ZZ":
        return rot(np.kron(Z, Z), 2 * t)
    if kind == "pSWAP":
        gen = params[0] / 2 * (np.kron(X, X) + np.kron(Y, Y)) + params[1] / 2 * np.kron(Z, Z)
        return expm(-1j * gen)
    if kind == "SWAP":
        return SWAP_MAT
    if kind == "CRx":
        return controlled(rot(X, t))
    if kind == "CRz":
        return controlled(rot(Z, t))
    if kind == "CSWAP":
        return controlled(SWAP_MAT)
    if kind == "CCP":
        return np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(np.complex128)
    if kind == "XXX":
        return rot(np.kron(np.kron(X, X), X), t)
    if kind in ("CPauli", "ACPauli"):
        return controlled(PauliString(pauli).matrix(), on=1 if kind == "CPauli" else 0)
    raise ValueError(kind)


@lru_cache(maxsize=64)
def _local_index(n: int, qubits: tuple[int, ...]) -> np.ndarray:
    j = np.arange(1 << n)
    k = len(qubits)
    idx = np.zeros_like(j)
    for pos, q in enumerate(qubits):
        idx |= ((j >> (n - 1 - q)) & 1) << (k - 1 - pos)
    return idx


def _monomial_parts(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cols = np.arange(u.shape[1])
    rows = np.argmax(np.abs(u), axis=0)
    return rows, u[rows, cols]


@lru_cache(maxsize=1024)
def _full_monomial(n: int, kind: str, qubits: tuple[int, ...], pauli: str) -> tuple[np.ndarray, np.ndarray]:
    u = _gate_matrix(kind, (), pauli, len(qubits))
    lperm, lphase = _monomial_parts(u)
    local = _local_index(n, qubits)
    j = np.arange(1 << n)
    clear = j.copy()
    for q in qubits:
        clear &= ~(1 << (n - 1 - q))
    new_local = lperm[local]
    target = clear.copy()
    k = len(qubits)
    for pos, q in enumerate(qubits):
        target |= ((new_local >> (k - 1 - pos)) & 1) << (n - 1 - q)
    return target, lphase[local]


def apply_gate(rho: np.ndarray, gate: Gate) -> np.ndarray:
    n = qubit_count_of(rho)
    if max(gate.qubits) >= n:
        raise IndexError(f"gate {gate.kind} on {gate.qubits} exceeds {n} qubits")
    if gate.kind in MONOMIAL_KINDS:
        perm, phase = _full_monomial(n, gate.kind, gate.qubits, gate.pauli)
        return apply_monomial(rho, perm, phase)
    if gate.kind in DIAGONAL_KINDS:
        diag = np.diag(gate.matrix())[_local_index(n, gate.qubits)]
        return apply_diagonal(rho, diag)
    return apply_unitary(rho, gate.matrix(), gate.qubits)


# -- noise models ----------------------------------------------------------------

NOISE_FAMILIES = ("depolarizing", "pairwise_depolarizing", "dephasing", "damping")


@dataclass(frozen=True)
class NoiseEntry:
    family: str
    prob: float
    amplifiable: bool = True

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"noise probability {self.prob} outside [0, 1]")


@dataclass(frozen=True)
class NoiseModel:
    """Channels attached after gates, keyed by gate kind or arity class (``"1q"``...).

    A gate uses the entry list of its own kind if present, otherwise that of
    its arity class. Only amplifiable entries scale with ``scale``.
    """

    classes: dict
    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("noise scale must be non-negative")
        classes = {}
        for key, entries in self.classes.items():
            classes[key] = tuple(e if isinstance(e, NoiseEntry) else NoiseEntry(**e) for e in entries)
        object.__setattr__(self, "classes", classes)
        self.effective(1.0)

    def entries_for(self, gate: Gate) -> tuple[NoiseEntry, ...]:
        if gate.kind in self.classes:
            return self.classes[gate.kind]
        return self.classes.get(f"{gate.arity}q", ())

    def effective(self, eps_scale: float = 1.0) -> dict:
        """Entry lists with scaled probabilities; raises if any leaves [0, 1]."""
        out = {}
        factor = self.scale * eps_scale
        for key, entries in self.classes.items():
            scaled = []
            for e in entries:
                p = e.prob * factor if e.amplifiable else e.prob
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"scaled {e.family} probability {p:.4g} for {key} outside [0, 1]")
                scaled.append(replace(e, prob=p))
            out[key] = tuple(scaled)
        return out

    def amplify(self, factor: float) -> "NoiseModel":
        if factor < 0:
            raise ValueError("amplification factor must be non-negative")
        amplified = NoiseModel(self.classes, self.scale * factor)
        return amplified

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "classes": {k: [vars(e).copy() for e in v] for k, v in self.classes.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        if "classes" in d:
            return cls(d["classes"], float(d.get("scale", 1.0)))
        return cls(d)


def ansatz_noise(two_qubit: float, single_qubit: float) -> NoiseModel:
    """Depolarizing after every gate: k-qubit channel with the class probability."""
    return NoiseModel({
        "1q": [NoiseEntry("depolarizing", single_qubit)],
        "2q": [NoiseEntry("depolarizing", two_qubit)],
    })


def hardware_noise(eps: float, damping_ratio: float = 0.1, depolarizing_ratio: float = 0.07,
                   two_qubit_factor: float = 5.0) -> NoiseModel:
    """Dephasing ``eps`` + damping (amplifiable) and fixed depolarizing, two-qubit gates magnified."""
    def entries(e):
        return [
            NoiseEntry("dephasing", e),
            NoiseEntry("damping", damping_ratio * e),
            NoiseEntry("depolarizing", depolarizing_ratio * e, amplifiable=False),
        ]
    return NoiseModel({"1q": entries(eps), "2q": entries(two_qubit_factor * eps)})


def _noise_ops(entry: NoiseEntry, qubits: tuple[int, ...]) -> list[tuple[KrausChannel, tuple[int, ...]]]:
    p = entry.prob
    if entry.family == "depolarizing":
        return [(depolarizing_channel(len(qubits), p), qubits)]
    if entry.family == "pairwise_depolarizing":
        ch = depolarizing_channel(2, p)
        return [(ch, (a, b)) for i, a in enumerate(qubits) for b in qubits[i + 1:]]
    if entry.family == "dephasing":
        ch = dephasing_channel(p)
    else:
        ch = damping_channel(p)
    return [(ch, (q,)) for q in qubits]


def gate_error_probability(entries: Iterable[NoiseEntry], arity: int) -> float:
    """Probability that at least one error event follows the gate."""
    keep = 1.0
    for e in entries:
        if e.family == "depolarizing":
            keep *= 1 - e.prob
        elif e.family == "pairwise_depolarizing":
            keep *= (1 - e.prob) ** (arity * (arity - 1) // 2)
        else:
            keep *= (1 - e.prob) ** arity
    return 1 - keep


# -- circuits ---------------------------------------------------------------------

@dataclass
class Circuit:
    qubit_count: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if max(g.qubits) >= self.qubit_count or min(g.qubits) < 0:
            raise ValueError(f"{g.kind} on {g.qubits} outside a {self.qubit_count}-qubit circuit")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.qubit_count != self.qubit_count:
            raise ValueError("cannot concatenate circuits of different widths")
        return Circuit(self.qubit_count, self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def count(self, kind: str | None = None, entangling: bool | None = None) -> int:
        return sum(
            1 for g in self.gates
            if (kind is None or g.kind == kind) and (entangling is None or g.is_entangling == entangling)
        )

    def noisy_gate_count(self, nm: NoiseModel) -> int:
        return sum(1 for g in self.gates if nm.entries_for(g))

    def expected_errors(self, nm: NoiseModel, eps_scale: float = 1.0) -> float:
        """Sum over gates of the probability that an error follows the gate."""
        eff = NoiseModel(nm.effective(eps_scale), 1.0)
        return sum(gate_error_probability(eff.entries_for(g), g.arity) for g in self.gates)

    def unitary(self) -> np.ndarray:
        from .channels import embed
        u = np.eye(1 << self.qubit_count, dtype=np.complex128)
        for g in self.gates:
            u = embed(g.matrix(), g.qubits, self.qubit_count) @ u
        return u

    def to_text(self) -> str:
        return f"# qubits {self.qubit_count}\n" + "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str, qubit_count: int | None = None) -> "Circuit":
        gates = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# qubits") and qubit_count is None:
                qubit_count = int(line.split()[2])
                continue
            if not line or line.startswith("#"):
                continue
            gates.append(Gate.from_text(line))
        if qubit_count is None:
            qubit_count = 1 + max(max(g.qubits) for g in gates)
        return cls(qubit_count, gates)


def merge_single_qubit_gates(circuit: Circuit) -> Circuit:
    """Fuse each run of single-qubit gates on a qubit into one custom ``U`` gate.

    Runs are cut by multi-qubit gates touching the qubit; the unitary is
    unchanged and each fused gate carries one single-qubit noise event.
    """
    pending: dict[int, np.ndarray] = {}
    out = Circuit(circuit.qubit_count)

    def flush(q):
        m = pending.pop(q, None)
        if m is not None:
            out.append(Gate("U", (q,), matrix_override=m))

    for g in circuit.gates:
        if g.arity == 1:
            q = g.qubits[0]
            pending[q] = g.matrix() @ pending.get(q, I2)
            continue
        for q in g.qubits:
            flush(q)
        out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def run_circuit(rho0: np.ndarray, circuit: Circuit, nm: NoiseModel | None = None,
                eps_scale: float = 1.0) -> np.ndarray:
    """Apply the gates in order, each followed by its noise-class channels."""
    n = qubit_count_of(rho0)
    if n != circuit.qubit_count:
        raise ValueError(f"state has {n} qubits, circuit {circuit.qubit_count}")
    rho = np.array(rho0, dtype=np.complex128)
    noise = NoiseModel(nm.effective(eps_scale), 1.0) if nm is not None else None
    for gate in circuit.gates:
        rho = apply_gate(rho, gate)
        if noise is None:
            continue
        for entry in noise.entries_for(gate):
            if entry.prob == 0:
                continue
            for ch, qs in _noise_ops(entry, gate.qubits):
                rho = apply_channel(rho, ch, qs)
    return rho


def run_pure(psi0: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Noiseless state-vector evolution."""
    n = circuit.qubit_count
    t = np.asarray(psi0, dtype=np.complex128).reshape((2,) * n)
    for g in circuit.gates:
        k = g.arity
        op = g.matrix().reshape((2,) * (2 * k))
        t = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(g.qubits)))
        t = np.moveaxis(t, list(range(k)), list(g.qubits))
    return t.reshape(-1)


def alternating_param_count(n_qubits: int, blocks: int) -> int:
    return n_qubits + 3 * n_qubits * blocks


def build_alternating_ansatz(n_qubits: int, blocks: int, params: Sequence[float] | None = None,
                             seed: int | None = None, entangler: str = "ZZ") -> Circuit:
    """Initial Ry layer, then per block Ry, Rz and a ring of parametrized entanglers.

    Gate count is ``N + 3 N blocks``. Missing ``params`` are drawn uniformly in
    ``[0, 2 pi)`` from ``seed``.
    """
    count = alternating_param_count(n_qubits, blocks)
    if params is None:
        params = np.random.default_rng(seed).uniform(0, 2 * np.pi, count)
    params = list(params)
    if len(params) != count:
        raise ValueError(f"ansatz needs {count} parameters, got {len(params)}")
    it = iter(params)
    c = Circuit(n_qubits)
    c.extend(Gate("Ry", (q,), (next(it),)) for q in range(n_qubits))
    for _ in range(blocks):
        c.extend(Gate("Ry", (q,), (next(it),)) for q in range(n_qubits))
        c.extend(Gate("Rz", (q,), (next(it),)) for q in range(n_qubits))
        for q in range(n_qubits):
            a, b = q, (q + 1) % n_qubits
            if a == b:
                c.append(Gate("Rz", (a,), (next(it),)))
            else:
                c.append(Gate(entangler, (a, b), (next(it),)))
    return c
