"""ESD estimators, their error bounds, and sampling-cost planning."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .states import renyi_entropy


class EstimateUndefined(ValueError):
    """The estimator's denominator vanished, went negative or underflowed."""


@dataclass(frozen=True)
class EsdEstimate:
    method: str
    n: int
    value: float
    prob0: float
    denominator_input: float  # prob0' for method A, lambda for method B
    bound: float = math.nan


def method_a(prob0: float, prob0_prime: float) -> float:
    """``(2 prob0 - 1) / (2 prob0' - 1)``."""
    denom = 2 * prob0_prime - 1
    if denom <= 0:
        raise EstimateUndefined(f"2 prob0' - 1 = {denom:.3g} is not positive")
    return (2 * prob0 - 1) / denom


def method_b(prob0: float, lam: float, n: int) -> float:
    """``(2 prob0 - 1) / lambda^n``."""
    if not 0 < lam <= 1:
        raise ValueError(f"dominant eigenvalue {lam} outside (0, 1]")
    denom = lam ** n
    if denom < 1e-300:
        raise EstimateUndefined(f"lambda^n = {denom:.3g} underflows")
    return (2 * prob0 - 1) / denom


def _check_lambda(lam: float) -> None:
    if not 0 < lam <= 1:
        raise ValueError(f"dominant eigenvalue {lam} outside (0, 1]")


@dataclass(frozen=True)
class QnBounds:
    q_n: float
    bound_a: float
    bound_b: float


def bound_qn(lam: float, p: Sequence[float], n: int) -> QnBounds:
    """``Q_n = (1/lambda - 1)^n sum_k p_k^n`` with the method A and B bounds."""
    _check_lambda(lam)
    p = np.asarray(p, dtype=float)
    q_n = (1 / lam - 1) ** n * float(np.sum(p ** n)) if p.size else 0.0
    return QnBounds(q_n, 2 * q_n / (1 + q_n), q_n)


def bound_qn_entropy(lam: float, p: Sequence[float], n: int) -> float:
    """Entropy form ``(1/lambda - 1)^n exp[-(n-1) H_n(p)]`` of the same quantity."""
    _check_lambda(lam)
    h = renyi_entropy(p, n)
    if math.isinf(h):
        return 0.0
    return (1 / lam - 1) ** n * math.exp(-(n - 1) * h)


def suppression_factor(lam: float, p_max: float) -> float:
    _check_lambda(lam)
    return (1 / lam - 1) * p_max


def bound_qn_general(lam: float, p_max: float, n: int) -> float:
    """``(1/lambda - 1)^n p_max^(n-1)``, valid for every error distribution."""
    _check_lambda(lam)
    return (1 / lam - 1) ** n * p_max ** (n - 1)


@dataclass(frozen=True)
class EffectiveBound:
    value: float
    commuting: bool
    void: bool = False
    note: str = ""


def bound_qn_effective(lam_min: float, p_elementwise_max: Sequence[float], n: int,
                       commuting: bool = True) -> EffectiveBound:
    """Bound for copies that differ slightly.

    For copies sharing an eigenbasis this is ``(1/lambda_min - 1)^n sum_k p_k,max^n``.
    Otherwise only ``(1/lambda_min - 1)^n`` times an unspecified constant is
    known, and nothing at all below ``lambda_min = 1/2``.
    """
    _check_lambda(lam_min)
    prefactor = (1 / lam_min - 1) ** n
    if commuting:
        p = np.asarray(p_elementwise_max, dtype=float)
        return EffectiveBound(prefactor * float(np.sum(p ** n)), True)
    if lam_min <= 0.5:
        return EffectiveBound(math.inf, False, True, "lambda_min <= 1/2: no exponential guarantee")
    return EffectiveBound(prefactor, False, False, "order estimate; multiply by an unknown constant")


def copies_required(precision: float, lam: float, p_max: float) -> int:
    """``ceil[(ln 1/E + ln(2/p_max)) / ln(1/Q)]``, at least 2."""
    if precision <= 0:
        raise ValueError("precision must be positive")
    q = suppression_factor(lam, p_max)
    if q >= 1:
        raise ValueError(f"suppression factor Q = {q:.3g} >= 1: no number of copies suffices")
    if q == 0:
        return 2
    n = (math.log(1 / precision) + math.log(2 / p_max)) / math.log(1 / q)
    return max(2, math.ceil(n - 1e-12))


def overhead_exponent(lam: float, q: float) -> float:
    """``f = ln(1/lambda) / ln(1/Q)``; shot cost grows as ``E^-(2 + 2f)`` roughly."""
    _check_lambda(lam)
    if not 0 < q < 1:
        raise ValueError(f"suppression factor {q} outside (0, 1)")
    return math.log(1 / lam) / math.log(1 / q)


@dataclass(frozen=True)
class ShotCounts:
    method: str
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


def _ceil_shots(x: float) -> int:
    if not math.isfinite(x):
        raise EstimateUndefined("shot count overflow")
    return max(1, math.ceil(x - 1e-9))


def shots_required(method: str, precision: float, lam: float, n: int, prob0: float,
                   prob0_prime: float | None = None) -> ShotCounts:
    """Shots so that shot noise alone stays within ``precision`` (one standard deviation)."""
    _check_lambda(lam)
    l2n = lam ** (2 * n)
    if l2n < 1e-300:
        raise EstimateUndefined("lambda^(2n) underflows")
    e2 = precision ** 2
    if method.upper() == "B":
        return ShotCounts("B", (_ceil_shots(4 * prob0 * (1 - prob0) / (e2 * l2n)),))
    if method.upper() != "A":
        raise ValueError(f"unknown method {method!r}")
    if prob0_prime is None:
        raise ValueError("method A needs prob0'")
    s1 = _ceil_shots(8 * prob0 * (1 - prob0) / (e2 * l2n))
    s2 = _ceil_shots(8 * prob0_prime * (1 - prob0_prime) * (2 * prob0 - 1) ** 2 / (e2 * l2n * l2n))
    return ShotCounts("A", (s1, s2))


def sample_prob(true_prob: float, n_shots: int, seed: int | np.random.Generator | None = None) -> float:
    """Fraction of ancilla-0 outcomes in ``n_shots`` simulated measurements."""
    if not 0 <= true_prob <= 1:
        raise ValueError(f"probability {true_prob} outside [0, 1]")
    if n_shots < 1:
        raise ValueError("need at least one shot")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return float(rng.binomial(n_shots, true_prob)) / n_shots


def attenuation_qubit_limit(gate_error: float, threshold: float) -> int | None:
    """Largest ``N(n-1)`` keeping ``(1 - gate_error)^(N(n-1))`` above ``threshold``.

    Returns None when no limit exists (threshold 0 is never reached, or the
    gates are error free).
    """
    if not 0 <= gate_error < 1:
        raise ValueError("gate error outside [0, 1)")
    if not 0 < threshold <= 1:
        if threshold == 0:
            return None
        raise ValueError("threshold outside (0, 1]")
    if gate_error == 0:
        return None
    if threshold == 1:
        return 0
    return math.floor(math.log(threshold) / math.log(1 - gate_error))


@dataclass
class ResourcePlan:
    epsilon: float
    lam: float
    p_max: float
    n: int
    Q: float
    Q_n: float
    f: float
    shots_A: list[int] = field(default_factory=list)
    shots_B: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def plan_resources(precision: float, lam: float, p_max: float, prob0: float | None = None) -> ResourcePlan:
    """Copies and shots for target ``precision``.

    ``prob0`` defaults to ``(1 + lambda^n)/2``, the value for an observable with
    unit expectation, and is used for both probabilities.
    """
    n = copies_required(precision, lam, p_max)
    q = suppression_factor(lam, p_max)
    f = overhead_exponent(lam, q) if 0 < q < 1 and lam < 1 else 0.0
    p0 = 0.5 * (1 + lam ** n) if prob0 is None else prob0
    a = shots_required("A", precision, lam, n, p0, p0)
    b = shots_required("B", precision, lam, n, p0)
    return ResourcePlan(precision, lam, p_max, n, q, bound_qn_general(lam, p_max, n), f,
                        list(a.counts), b.total)
