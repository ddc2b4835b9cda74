"""Zero-noise extrapolation: exact interpolation, polynomial and rational fits.

An expectation value from a circuit of ``nu`` gates, each followed by a
channel applied with probability ``eps``, is a degree-``nu`` polynomial in
``eps``; ``fit_exact`` uses that directly. The Pade form
``a0 + (a1 e + a2 e^2 + a3 e^3) / (1 + a4 e + a5 e^2)`` models the typical
``eps (1-eps)^nu / (1 - 2 eps)`` shape of derangement noise for large ``nu``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuits import NoiseModel

FIT_KINDS = ("linear", "poly", "exact_interp", "pade33")


@dataclass(frozen=True)
class NoiseScaleSeries:
    eps: np.ndarray
    values: np.ndarray
    nu: int | None = None
    shots: np.ndarray | None = None

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if eps.ndim != 1 or eps.shape != values.shape or eps.size < 1:
            raise ValueError("eps and values must be equal-length 1-d sequences")
        if np.any(eps < 0):
            raise ValueError("noise levels must be non-negative")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "values", values)

    def sorted(self) -> "NoiseScaleSeries":
        order = np.argsort(self.eps, kind="stable")
        if np.any(np.diff(self.eps[order]) <= 0):
            raise ValueError("duplicate noise levels")
        return NoiseScaleSeries(self.eps[order], self.values[order], self.nu)


@dataclass
class FitResult:
    kind: str
    zero_noise_value: float
    coefficients: np.ndarray
    residual: float
    eps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fitted: np.ndarray = field(default_factory=lambda: np.zeros(0))
    condition: float = 1.0
    iterations: int = 0
    degree: int | None = None
    model: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    @property
    def residuals(self) -> np.ndarray:
        return self.values - self.fitted

    def __call__(self, eps) -> np.ndarray:
        return self.model(np.asarray(eps, dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "value", "fitted", "residual"])
        for row in zip(self.eps, self.values, self.fitted, self.residuals):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "zero_noise_value": float(self.zero_noise_value),
            "coefficients": [float(c) for c in self.coefficients],
            "residual": float(self.residual),
            "condition": float(self.condition),
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _series(series, values=None) -> NoiseScaleSeries:
    if isinstance(series, NoiseScaleSeries):
        return series
    return NoiseScaleSeries(series, values)


def fit_polynomial(series, degree: int, values=None) -> FitResult:
    """Least-squares polynomial in ``eps``; the constant term is the zero-noise value.

    ``eps`` is rescaled to [0, 1] before solving; ``condition`` is the condition
    number of the rescaled design matrix.
    """
    s = _series(series, values)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if s.eps.size < degree + 1:
        raise ValueError(f"degree {degree} needs at least {degree + 1} points, got {s.eps.size}")
    scale = float(np.max(s.eps)) or 1.0
    design = np.vander(s.eps / scale, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(design, s.values, rcond=None)
    cond = float(np.linalg.cond(design)) if degree else 1.0
    coef = coef / scale ** np.arange(degree + 1)
    model = lambda e, c=coef: np.polynomial.polynomial.polyval(e, c)
    fitted = model(s.eps)
    return FitResult("linear" if degree == 1 else "poly", float(coef[0]), coef,
                     float(np.sqrt(np.mean((s.values - fitted) ** 2))), s.eps, s.values, fitted,
                     cond, degree=degree, model=model)


def divided_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Newton coefficients ``f[x0], f[x0,x1], ...``."""
    c = np.array(y, dtype=float)
    for j in range(1, len(x)):
        c[j:] = (c[j:] - c[j - 1:-1]) / (x[j:] - x[:-j])
    return c


def newton_eval(x_nodes: np.ndarray, coef: np.ndarray, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, coef[-1])
    for k in range(len(coef) - 2, -1, -1):
        out = out * (t - x_nodes[k]) + coef[k]
    return out


def fit_exact(series, values=None, nu: int | None = None) -> FitResult:
    """Newton interpolation through all points (degree = points - 1).

    If ``nu`` is known the series must hold exactly ``nu + 1`` points.
    """
    s = _series(series, values)
    nu = s.nu if nu is None else nu
    if nu is not None and s.eps.size != nu + 1:
        raise ValueError(f"{nu} noisy gates need exactly {nu + 1} points, got {s.eps.size}")
    if len(np.unique(s.eps)) != s.eps.size:
        raise ValueError("duplicate noise levels")
    x = s.eps.copy()
    coef = divided_differences(x, s.values)
    model = lambda e, x=x, c=coef: newton_eval(x, c, e)
    zero = float(model(np.array(0.0)))
    fitted = model(s.eps)
    return FitResult("exact_interp", zero, coef, float(np.max(np.abs(s.values - fitted))),
                     s.eps, s.values, fitted, degree=s.eps.size - 1, model=model)


# -- rational fit -----------------------------------------------------------------

def _pade_eval(a: np.ndarray, e: np.ndarray) -> np.ndarray:
    num = a[1] * e + a[2] * e ** 2 + a[3] * e ** 3
    den = 1 + a[4] * e + a[5] * e ** 2
    return a[0] + num / den


def _pade_jacobian(a: np.ndarray, e: np.ndarray) -> np.ndarray:
    num = a[1] * e + a[2] * e ** 2 + a[3] * e ** 3
    den = 1 + a[4] * e + a[5] * e ** 2
    return np.column_stack([
        np.ones_like(e), e / den, e ** 2 / den, e ** 3 / den,
        -num * e / den ** 2, -num * e ** 2 / den ** 2,
    ])


def _linearized_pade(e: np.ndarray, y: np.ndarray) -> np.ndarray:
    # y (1 + a4 e + a5 e^2) = a0 (1 + a4 e + a5 e^2) + a1 e + a2 e^2 + a3 e^3
    # is linear in b = (a0, a0 a4 + a1, a0 a5 + a2, a3, a4, a5)
    design = np.column_stack([np.ones_like(e), e, e ** 2, e ** 3, -e * y, -e ** 2 * y])
    b, *_ = np.linalg.lstsq(design, y, rcond=None)
    a0, a4, a5 = b[0], b[4], b[5]
    return np.array([a0, b[1] - a0 * a4, b[2] - a0 * a5, b[3], a4, a5])


def _denominator_root_in(a: np.ndarray, lo: float, hi: float) -> bool:
    roots = np.roots([a[5], a[4], 1.0]) if a[5] != 0 else (np.array([-1 / a[4]]) if a[4] != 0 else [])
    return any(abs(r.imag) < 1e-12 and lo <= r.real <= hi for r in np.atleast_1d(roots))


class FitRejected(ValueError):
    pass


def fit_pade33(series, values=None, max_iter: int = 200, tol: float = 1e-15) -> FitResult:
    """Rational fit by linearized least squares, refined by damped Gauss-Newton.

    The noise axis is rescaled to [0, 1] internally. A refinement step that
    increases the squared residual is halved until it does not; the loop
    stops after ``max_iter`` steps or when the relative improvement falls
    below ``tol``. Fits whose denominator vanishes on the sampled range are
    rejected.
    """
    s = _series(series, values)
    if s.eps.size < 6:
        raise ValueError(f"the rational fit needs at least 6 points, got {s.eps.size}")
    scale = float(np.max(s.eps)) or 1.0
    e = s.eps / scale
    offset = float(np.mean(s.values))
    spread = float(np.max(np.abs(s.values - offset))) or 1.0
    y = (s.values - offset) / spread
    a = _linearized_pade(e, y)
    r = y - _pade_eval(a, e)
    cost = float(r @ r)
    it = 0
    for it in range(1, max_iter + 1):
        jac = _pade_jacobian(a, e)
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        t = 1.0
        while t > 1e-10:
            trial = a + t * step
            rt = y - _pade_eval(trial, e)
            ct = float(rt @ rt)
            if ct <= cost:
                break
            t *= 0.5
        else:
            break
        improvement = cost - ct
        a, r, cost = trial, rt, ct
        if improvement <= tol * max(cost, 1e-300):
            break
    if _denominator_root_in(a, 0.0, 1.0):
        raise FitRejected("rational fit has a pole inside the sampled noise range")
    # undo the scalings: eps -> eps/scale, value -> offset + spread * value
    a_out = np.array([
        offset + spread * a[0],
        spread * a[1] / scale, spread * a[2] / scale ** 2, spread * a[3] / scale ** 3,
        a[4] / scale, a[5] / scale ** 2,
    ])
    model = lambda x, c=a_out: _pade_eval(c, x)
    fitted = model(s.eps)
    return FitResult("pade33", float(a_out[0]), a_out, float(np.sqrt(np.mean((s.values - fitted) ** 2))),
                     s.eps, s.values, fitted, iterations=it, model=model)


def pade_expansion(nu: int, num_degree: int = 3, den_degree: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Pade coefficients of ``eps (1-eps)^nu / (1 - 2 eps)`` around ``eps = 0``.

    Returns ascending numerator and denominator coefficients (denominator
    constant 1), solved from the Taylor series.
    """
    order = num_degree + den_degree
    # Taylor coefficients of (1-e)^nu / (1-2e), shifted by one for the e factor
    binom = [math.comb(nu, j) * (-1) ** j for j in range(order + 1)]
    g = [sum(binom[j] * 2 ** (k - j) for j in range(k + 1)) for k in range(order)]
    c = np.array([0.0] + [float(v) for v in g])
    # q-coefficient equations from orders num_degree+1 .. order
    m = den_degree
    lhs = np.array([[c[k - j] if k - j >= 0 else 0.0 for j in range(1, m + 1)]
                    for k in range(num_degree + 1, order + 1)])
    rhs = -c[num_degree + 1: order + 1]
    q = np.concatenate([[1.0], np.linalg.solve(lhs, rhs)])
    p = np.array([sum(q[j] * c[k - j] for j in range(0, min(k, m) + 1)) for k in range(num_degree + 1)])
    return p, q


def pade_a_closed_form(nu: float) -> float:
    """Closed form for minus the ``eps^2`` numerator coefficient of the (3,3) expansion."""
    return 2 * (62 + 11 * nu - 8 * nu ** 2 + nu ** 3) / (5 * (26 - 9 * nu + nu ** 2))


def derangement_noise_model(eps: np.ndarray, e0: float, eta: float, nu: int) -> np.ndarray:
    """``E0 - eta eps (1-eps)^nu / (2 eps - 1)``, the large-circuit mean-error shape."""
    eps = np.asarray(eps, dtype=float)
    return e0 - eta * eps * (1 - eps) ** nu / (2 * eps - 1)


# -- pipeline ---------------------------------------------------------------------

def amplify(nm: NoiseModel, factor: float) -> NoiseModel:
    """Scale the amplifiable noise entries by ``factor``; validity is re-checked."""
    out = nm.amplify(factor)
    out.effective(1.0)
    return out


def default_grid(eps_base: float, points: int = 6) -> np.ndarray:
    return np.linspace(eps_base, 2 * eps_base, points)


def fit_series(series: NoiseScaleSeries, fit_kind: str, degree: int | None = None) -> FitResult:
    if fit_kind == "linear":
        return fit_polynomial(series, 1)
    if fit_kind == "poly":
        return fit_polynomial(series, 3 if degree is None else degree)
    if fit_kind == "exact_interp":
        return fit_exact(series)
    if fit_kind == "pade33":
        return fit_pade33(series)
    raise ValueError(f"unknown fit kind {fit_kind!r}; expected one of {FIT_KINDS}")


def zne_pipeline(evaluate: Callable[[float], float], eps_grid: Sequence[float], fit_kind: str = "poly",
                 degree: int | None = None, map_fn=map) -> FitResult:
    """Evaluate at every grid point (via ``map_fn``, e.g. a pool's map) and fit.

    A single-point grid returns that value unchanged.
    """
    grid = np.asarray(eps_grid, dtype=float)
    values = np.array(list(map_fn(evaluate, grid)), dtype=float)
    series = NoiseScaleSeries(grid, values)
    if grid.size == 1:
        model = lambda e, v=values[0]: np.full_like(np.asarray(e, dtype=float), v)
        return FitResult("passthrough", float(values[0]), values.copy(), 0.0, grid, values, values.copy(),
                         model=model)
    return fit_series(series.sorted(), fit_kind, degree)
