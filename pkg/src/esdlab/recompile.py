"""Recompiling the controlled-SWAP into native gate sets.

Three notions of equivalence with a target ``T`` on (control, a, b):

* type A: ``|tr(T^dag V)| / 8`` (global phase free);
* type B: the register pair (a, b) may absorb any unitary ``W`` applied after
  ``V``; the best ``W`` is found in closed form from an SVD;
* type C: as type B, with the target ``C[X_a] CSWAP`` that also measures the
  observable. Other Pauli observables follow from single-qubit basis changes.

Templates fix the entangler kinds and placements; every entangler is followed
by a full Euler rotation on each qubit it touches, after an initial Euler
layer on all three qubits; qubits idle in the last entangler get a final
one. Angles are optimized with L-BFGS from seeded random starts using exact
gradients.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .circuits import Circuit, Gate, P1, controlled, SWAP_MAT
from .channels import embed
from .states import pauli_matrix

X = pauli_matrix("X")
Y = pauli_matrix("Y")
Z = pauli_matrix("Z")
CSWAP = controlled(SWAP_MAT)
SUCCESS = 1 - 1e-6


def _k(*ms):
    out = np.ones((1, 1), dtype=np.complex128)
    for m in ms:
        out = np.kron(out, m)
    return out


def equivalence_full(u: np.ndarray, v: np.ndarray) -> float:
    """``|tr(u^dag v)| / d``."""
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise ValueError("equivalence needs two square matrices of equal size")
    return float(abs(np.vdot(u, v)) / u.shape[0])


def _reduced(u: np.ndarray, v: np.ndarray, pair: Sequence[int]) -> np.ndarray:
    """``tr_rest(v u^dag)`` as a 4x4 matrix on ``pair`` (3-qubit operators)."""
    rest = [q for q in range(3) if q not in pair][0]
    a = (v @ u.conj().T).reshape((2,) * 6)
    order = list(pair) + [rest] + [3 + q for q in pair] + [3 + rest]
    a = np.transpose(a, order).reshape(4, 2, 4, 2)
    return np.einsum("iaja->ij", a)


def _is_unitary(m: np.ndarray) -> bool:
    return np.allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-8)


def equivalence_local_su4(u: np.ndarray, v: np.ndarray, swapped_pair: Sequence[int] = (1, 2)) -> float:
    """``max_W |tr(u^dag (W on pair) v)| / 8`` = nuclear norm of ``tr_rest(v u^dag)`` / 8."""
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != (8, 8) or v.shape != (8, 8):
        raise ValueError("local SU(4) equivalence is defined for 3-qubit unitaries")
    if not (_is_unitary(u) and _is_unitary(v)):
        raise ValueError("inputs must be unitary")
    return float(np.sum(np.linalg.svd(_reduced(u, v, swapped_pair), compute_uv=False)) / 8)


def optimal_pair_unitary(u: np.ndarray, v: np.ndarray, swapped_pair: Sequence[int] = (1, 2)) -> np.ndarray:
    """The 4x4 ``W`` attaining the local SU(4) fidelity (``W = V U^dag`` from ``M = U S V^dag``)."""
    m = _reduced(np.asarray(u), np.asarray(v), swapped_pair)
    uu, _, vh = np.linalg.svd(m)
    return vh.conj().T @ uu.conj().T


# -- gate sets and templates ------------------------------------------------------

@dataclass(frozen=True)
class GateSet:
    name: str
    entangling: tuple[str, ...]
    single: str  # Euler axes, e.g. "zyz"
    table: dict = field(default_factory=dict, compare=False)


# Reference entangler counts per equivalence type; tuples split by entangler kind
GATE_SETS = {
    "CRx": GateSet("CRx", ("CRx",), "zyz", {"A": (6,), "B": (5,), "C": (4,)}),
    "CRz": GateSet("CRz", ("CRz",), "zyz", {"A": (6,), "B": (5,), "C": (4,)}),
    "XX": GateSet("XX", ("XX",), "zyz", {"A": (6,), "B": (5,), "C": (4,)}),
    "pSWAP": GateSet("pSWAP", ("pSWAP",), "zyz", {"A": (6,), "B": (5,), "C": (4,)}),
    "XXX": GateSet("XXX", ("XXX", "XX"), "zyz", {"A": (3, 3), "B": (3, 0), "C": (2, 1)}),
    "CCP": GateSet("CCP", ("CCP", "CRz"), "xyx", {"A": (1, 2), "B": (1, 1), "C": (1, 2)}),
}
TABLE_SINGLE = {  # nu_s column, reported only
    "pSWAP": {"A": 11, "B": 4, "C": 3},
}


@dataclass(frozen=True)
class Template:
    """Entangler placements; qubit 0 is the control, 1 and 2 the swapped pair."""

    gateset: str
    entanglers: tuple[tuple[str, tuple[int, ...]], ...]
    single: str = "zyz"

    @property
    def entangling_count(self) -> int:
        return len(self.entanglers)

    def counts(self) -> tuple[int, ...]:
        kinds = GATE_SETS[self.gateset].entangling
        return tuple(sum(1 for k, _ in self.entanglers if k == kind) for kind in kinds)

    def elements(self) -> list[tuple[str, tuple[int, ...]]]:
        """Gate slots in circuit order, single-qubit rotations included."""
        out = []
        euler = lambda q: [("R" + ax, (q,)) for ax in self.single]
        for q in range(3):
            out += euler(q)
        for kind, qs in self.entanglers:
            out.append((kind, qs))
            for q in sorted(set(qs)) if len(qs) < 3 else range(3):
                out += euler(q)
        if self.entanglers:
            last = set(self.entanglers[-1][1])
            for q in range(3):
                if q not in last:
                    out += euler(q)
        return out

    def single_count(self) -> int:
        return sum(1 for k, _ in self.elements() if k.startswith("R") and len(k) == 2)

    def to_dict(self) -> dict:
        return {"gateset": self.gateset, "single": self.single,
                "entanglers": [[k, list(q)] for k, q in self.entanglers]}


_GENERATORS_1Q = {"x": X / 2, "y": Y / 2, "z": Z / 2}


def _generators(kind: str, qubits: tuple[int, ...]) -> list[np.ndarray] | np.ndarray:
    """Hermitian generators ``H`` with gate ``exp(-i theta H)`` (list), or a fixed matrix."""
    if kind in ("Rx", "Ry", "Rz"):
        return [embed(_GENERATORS_1Q[kind[1]], qubits, 3)]
    if kind == "CRx":
        return [embed(np.kron(P1, X) / 2, qubits, 3)]
    if kind == "CRz":
        return [embed(np.kron(P1, Z) / 2, qubits, 3)]
    if kind == "XX":
        return [embed(np.kron(X, X), qubits, 3)]
    if kind == "pSWAP":
        return [embed((np.kron(X, X) + np.kron(Y, Y)) / 2, qubits, 3), embed(np.kron(Z, Z) / 2, qubits, 3)]
    if kind == "XXX":
        return [embed(_k(X, X, X) / 2, qubits, 3)]
    if kind == "CCP":
        return embed(np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(np.complex128), qubits, 3)
    raise ValueError(f"no generator for {kind}")


class CompiledTemplate:
    """Fast evaluation of ``V(theta)`` and of ``Re tr(Y dV/dtheta)`` for a template."""

    def __init__(self, template: Template):
        self.template = template
        self.slots = []  # (kind, qubits, param offset, n params)
        mats = []
        for kind, qs in template.elements():
            gen = _generators(kind, qs)
            if isinstance(gen, np.ndarray):
                mats.append(("fixed", gen))
            else:
                for h in gen:
                    w, v = np.linalg.eigh(h)
                    mats.append(("param", (w, v)))
            self.slots.append((kind, qs))
        self.ops = mats
        self.n_params = sum(1 for t, _ in mats if t == "param")

    def gates(self, theta: np.ndarray) -> list[np.ndarray]:
        out, i = [], 0
        for t, data in self.ops:
            if t == "fixed":
                out.append(data)
            else:
                w, v = data
                out.append((v * np.exp(-1j * theta[i] * w)) @ v.conj().T)
                i += 1
        return out

    def unitary(self, theta: np.ndarray) -> np.ndarray:
        u = np.eye(8, dtype=np.complex128)
        for g in self.gates(theta):
            u = g @ u
        return u

    def value_and_grad(self, theta: np.ndarray, objective) -> tuple[float, np.ndarray]:
        gs = self.gates(theta)
        prefix = [np.eye(8, dtype=np.complex128)]
        for g in gs:
            prefix.append(g @ prefix[-1])
        v = prefix[-1]
        f, ymat = objective(v)
        # d/dtheta_k tr(Y V) = tr(Y S_k (-i H_k) P_k), S_k = product of later gates
        grad = np.empty(self.n_params)
        suffix = ymat
        i = self.n_params
        for k in range(len(gs) - 1, -1, -1):
            t, data = self.ops[k]
            if t == "param":
                i -= 1
                w, vv = data
                h = (vv * w) @ vv.conj().T
                grad[i] = float(np.real(-1j * np.sum((suffix @ h).T * prefix[k + 1])))
            suffix = suffix @ gs[k]
        return f, grad

    def circuit(self, theta: np.ndarray) -> Circuit:
        c = Circuit(3)
        i = 0
        for kind, qs in self.slots:
            if kind == "CCP":
                c.append(Gate("CCP", qs))
            elif kind == "pSWAP":
                c.append(Gate("pSWAP", qs, (theta[i], theta[i + 1])))
                i += 2
            elif kind == "XX":
                c.append(Gate("XX", qs, (theta[i],)))
                i += 1
            else:
                c.append(Gate(kind, qs, (theta[i],)))
                i += 1
        return c


def observable_target(pauli: str = "X") -> np.ndarray:
    """``C[P_a] CSWAP``: controlled derangement followed by the controlled observable on qubit a."""
    p = pauli_matrix(pauli)
    return controlled(np.kron(p, np.eye(2))) @ CSWAP


def target_unitary(eq_type: str, observable: str = "X") -> np.ndarray:
    return observable_target(observable) if eq_type.upper() == "C" else CSWAP


def _objective(target: np.ndarray, eq_type: str):
    """Returns ``v -> (fidelity, Y)`` with ``d fidelity = Re tr(Y dV)``."""
    td = target.conj().T
    if eq_type.upper() == "A":
        def obj(v):
            z = np.vdot(target, v)
            az = abs(z)
            phase = np.conj(z) / az if az > 0 else 1.0
            return az / 8, phase * td / 8
        return obj

    def obj(v):
        m = _reduced(target, v, (1, 2))
        uu, s, vh = np.linalg.svd(m)
        q = uu @ vh  # fidelity = Re tr(Q^dag M)
        # M = tr_0(V T^dag) on (1,2): tr(Q^dag M) = tr((I_0 (x) Q^dag) V T^dag)
        big = np.kron(np.eye(2), q.conj().T)
        return float(np.sum(s)) / 8, td @ big / 8
    return obj


def fidelity(v: np.ndarray, eq_type: str, observable: str = "X") -> float:
    t = target_unitary(eq_type, observable)
    if eq_type.upper() == "A":
        return equivalence_full(t, v)
    return equivalence_local_su4(t, v, (1, 2))


@dataclass
class EquivalenceReport:
    gateset: str
    eq_type: str
    fidelity: float
    entangling_count: int
    entangling_split: tuple[int, ...]
    single_count: int
    best_params: list[float]
    restarts_used: int
    template: dict
    achieved: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def optimize_template(template: Template, eq_type: str, restarts: int = 50, seed: int = 0,
                      observable: str = "X", stop_at: float = 1 - 1e-9, maxiter: int = 3000
                      ) -> tuple[float, np.ndarray, int]:
    """Best fidelity over seeded random starts; stops early once ``stop_at`` is reached."""
    ct = CompiledTemplate(template)
    obj = _objective(target_unitary(eq_type, observable), eq_type)

    def cost(theta):
        f, g = ct.value_and_grad(theta, obj)
        return 1 - f, -g

    rng = np.random.default_rng(seed)
    best_f, best_x, used = -1.0, np.zeros(ct.n_params), 0
    for r in range(restarts):
        x0 = rng.uniform(0, 2 * np.pi, ct.n_params)
        res = minimize(cost, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 1e-16, "gtol": 1e-12})
        used = r + 1
        f = 1 - float(res.fun)
        if f > best_f:
            best_f, best_x = f, res.x
        if best_f >= stop_at:
            break
    # the exact fidelity of the returned angles, not the optimizer's running value
    best_f = fidelity(ct.unitary(best_x), eq_type, observable)
    return best_f, best_x, used


def recompile(gateset: str, eq_type: str, template: Template | None = None, restarts: int = 50,
              seed: int = 0, observable: str = "X") -> EquivalenceReport:
    """Optimize ``template`` (default: the stored template for the reference count)."""
    eq_type = eq_type.upper()
    if template is None:
        template = default_template(gateset, eq_type)
    f, x, used = optimize_template(template, eq_type, restarts, seed, observable)
    return EquivalenceReport(gateset, eq_type, f, template.entangling_count, template.counts(),
                             template.single_count(), [float(t) for t in x], used,
                             template.to_dict(), f >= SUCCESS)


def recompiled_circuit(report: EquivalenceReport, include_pair_unitary: bool = True) -> Circuit:
    """The 3-qubit circuit on (control, a, b) for a report's best angles.

    For type B/C reports the optimal pair unitary is appended as a custom gate so
    the circuit reproduces its target up to a global phase; pass
    ``include_pair_unitary=False`` for the hardware circuit that leaves it out.
    """
    t = Template(report.template["gateset"],
                 tuple((k, tuple(q)) for k, q in report.template["entanglers"]),
                 report.template["single"])
    ct = CompiledTemplate(t)
    theta = np.asarray(report.best_params)
    c = ct.circuit(theta)
    if include_pair_unitary and report.eq_type in ("B", "C"):
        target = target_unitary(report.eq_type)
        w = optimal_pair_unitary(target, ct.unitary(theta), (1, 2))
        c.append(Gate("U", (1, 2), matrix_override=w))
    return c


# Entangler placements found offline with ``search_placements``; every one
# reaches fidelity 1 - 1e-14 or better from seeded starts.
TEMPLATES: dict[tuple[str, str], tuple[tuple[str, tuple[int, ...]], ...]] = {
    ("CRx", "A"): (("CRx", (2, 1)), ("CRx", (2, 0)), ("CRx", (1, 2)),
                   ("CRx", (1, 0)), ("CRx", (0, 2)), ("CRx", (1, 2))),
    ("CRx", "B"): (("CRx", (1, 0)), ("CRx", (1, 2)), ("CRx", (1, 2)), ("CRx", (0, 2)), ("CRx", (0, 1))),
    ("CRx", "C"): (("CRx", (2, 1)), ("CRx", (1, 2)), ("CRx", (0, 1)), ("CRx", (0, 2))),
    ("CRz", "A"): (("CRz", (2, 1)), ("CRz", (0, 1)), ("CRz", (1, 2)),
                   ("CRz", (0, 1)), ("CRz", (0, 2)), ("CRz", (2, 1))),
    ("CRz", "B"): (("CRz", (1, 0)), ("CRz", (1, 2)), ("CRz", (1, 2)), ("CRz", (0, 2)), ("CRz", (0, 1))),
    ("CRz", "C"): (("CRz", (2, 1)), ("CRz", (1, 2)), ("CRz", (0, 1)), ("CRz", (0, 2))),
    ("XX", "A"): (("XX", (1, 2)), ("XX", (0, 2)), ("XX", (0, 1)), ("XX", (1, 2)), ("XX", (0, 2)), ("XX", (1, 2))),
    ("XX", "B"): (("XX", (0, 2)), ("XX", (1, 2)), ("XX", (1, 2)), ("XX", (0, 2)), ("XX", (0, 1))),
    ("XX", "C"): (("XX", (1, 2)), ("XX", (1, 2)), ("XX", (0, 2)), ("XX", (0, 1))),
    ("pSWAP", "A"): (("pSWAP", (0, 1)), ("pSWAP", (1, 2)), ("pSWAP", (0, 2)),
                     ("pSWAP", (1, 2)), ("pSWAP", (0, 1)), ("pSWAP", (1, 2))),
    ("pSWAP", "B"): (("pSWAP", (0, 2)), ("pSWAP", (0, 1)), ("pSWAP", (1, 2)), ("pSWAP", (0, 2)), ("pSWAP", (0, 1))),
    ("pSWAP", "C"): (("pSWAP", (1, 2)), ("pSWAP", (0, 1)), ("pSWAP", (1, 2)), ("pSWAP", (0, 1))),
    ("XXX", "A"): (("XXX", (0, 1, 2)), ("XXX", (0, 1, 2)), ("XXX", (0, 1, 2)),
                   ("XX", (1, 2)), ("XX", (1, 2)), ("XX", (1, 2))),
    ("XXX", "B"): (("XXX", (0, 1, 2)), ("XXX", (0, 1, 2)), ("XXX", (0, 1, 2))),
    ("XXX", "C"): (("XX", (1, 2)), ("XXX", (0, 1, 2)), ("XXX", (0, 1, 2))),
    ("CCP", "A"): (("CRz", (1, 2)), ("CCP", (0, 1, 2)), ("CRz", (1, 2))),
    ("CCP", "B"): (("CRz", (1, 2)), ("CCP", (0, 1, 2))),
    ("CCP", "C"): (("CRz", (1, 2)), ("CCP", (0, 1, 2)), ("CRz", (0, 1))),
}


def default_template(gateset: str, eq_type: str) -> Template:
    gs = GATE_SETS[gateset]
    key = (gateset, eq_type.upper())
    if key in TEMPLATES:
        return Template(gateset, TEMPLATES[key], gs.single)
    return Template(gateset, alternating_placements(gs, gs.table[eq_type.upper()]), gs.single)


_PAIRS = ((0, 1), (1, 2), (0, 2))


def alternating_placements(gs: GateSet, counts: Sequence[int]) -> tuple:
    """Entanglers of each kind cycling over the qubit pairs (three-qubit kinds span all)."""
    out = []
    for kind, count in zip(gs.entangling, counts):
        for i in range(count):
            if kind in ("XXX", "CCP"):
                out.append((kind, (0, 1, 2)))
            else:
                out.append((kind, _PAIRS[i % 3]))
    return tuple(out)


def placement_options(kind: str) -> list[tuple[int, ...]]:
    if kind in ("XXX", "CCP"):
        return [(0, 1, 2)]
    if kind in ("CRx", "CRz"):
        return [(a, b) for a in range(3) for b in range(3) if a != b]
    return list(_PAIRS)


def search_placements(gateset: str, eq_type: str, starts: int = 40, restarts: int = 4,
                      seed: int = 0) -> tuple[float, Template]:
    """Hill climbing over entangler placements and kind orders.

    Each start draws a random order and placement, then accepts single-slot
    placement changes or adjacent swaps while the best-of-``restarts``
    fidelity improves. Returns the best (fidelity, template) seen.
    """
    gs = GATE_SETS[gateset]
    counts = gs.table[eq_type.upper()]
    rng = np.random.default_rng(seed)
    kinds = [k for k, c in zip(gs.entangling, counts) for _ in range(c)]
    cache: dict = {}

    def score(ents):
        if ents not in cache:
            cache[ents] = optimize_template(Template(gateset, ents, gs.single), eq_type, restarts, 1)[0]
        return cache[ents]

    best = (-1.0, None)
    for _ in range(starts):
        order = [kinds[i] for i in rng.permutation(len(kinds))]
        ents = tuple((k, placement_options(k)[rng.integers(len(placement_options(k)))]) for k in order)
        f = score(ents)
        improved = True
        while improved and f < 1 - 1e-9:
            improved = False
            moves = [ents[:i] + ((ents[i][0], q),) + ents[i + 1:]
                     for i in range(len(ents)) for q in placement_options(ents[i][0]) if q != ents[i][1]]
            moves += [ents[:i] + (ents[i + 1], ents[i]) + ents[i + 2:]
                      for i in range(len(ents) - 1) if ents[i][0] != ents[i + 1][0]]
            for k in rng.permutation(len(moves)):
                fc = score(moves[k])
                if fc > f + 1e-7:
                    ents, f, improved = moves[k], fc, True
                    break
        if f > best[0]:
            best = (f, Template(gateset, ents, gs.single))
        if f >= 1 - 1e-9:
            break
    return best


def verify_reference_counts(rows: Sequence[tuple[str, str]] | None = None, restarts: int = 50,
                  seed: int = 0) -> dict:
    """Achievability of the reference gate counts; misses are inconclusive, not errors."""
    if rows is None:
        rows = [(g, t) for g in GATE_SETS for t in ("A", "B", "C")]
    out = {}
    for g, t in rows:
        rep = recompile(g, t, restarts=restarts, seed=seed)
        out[f"{g}/{t}"] = {
            "fidelity": rep.fidelity,
            "entangling": list(rep.entangling_split),
            "single": rep.single_count,
            "table_single": TABLE_SINGLE.get(g, {}).get(t),
            "achieved": rep.achieved,
            "status": "achieved" if rep.achieved else "inconclusive",
            "restarts_used": rep.restarts_used,
        }
    return out
