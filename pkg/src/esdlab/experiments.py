"""Desk-scale experiment drivers producing deterministic result tables.

Every experiment takes a resolved config dict and a master seed. Independent
cells (states, noise levels, points) run through ``run_cells``, which keeps
the cell order fixed whatever the worker count, and derive their random
streams from ``cell_rng`` so results never depend on scheduling.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import platform
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy
from scipy.optimize import brentq

from . import __version__
from .circuits import (
    Circuit,
    NoiseEntry,
    NoiseModel,
    ansatz_noise,
    build_alternating_ansatz,
    hardware_noise,
    merge_single_qubit_gates,
    run_circuit,
    run_pure,
)
from .derangement import (
    DEFAULT_QUBIT_CAP,
    EsdCircuitSpec,
    NativeCswaps,
    build_esd_circuit,
    prob0_circuit,
    prob0_fast,
    prob0_identical,
)
from .estimator import (
    EstimateUndefined,
    bound_qn_effective,
    bound_qn_entropy,
    bound_qn_general,
    method_a,
    method_b,
    plan_resources,
)
from .recompile import recompile, recompiled_circuit
from .states import (
    PauliString,
    coherent_mismatch,
    expectation,
    pure_state,
    random_density_matrix,
    random_pauli_strings,
    spectral_data,
    vector_expectation,
)
from .vqe import (
    OptimizerConfig,
    SpinRingSpec,
    build_spin_ring,
    build_vha,
    energy_with_esd,
    exact_ground_energy,
    noisy_vha_state,
    optimize_vha,
    spectral_energy,
)
from .zne import FitRejected, NoiseScaleSeries, fit_pade33, fit_polynomial

EXPERIMENTS = (
    "suppression-sweep",
    "derangement-zne",
    "ground-state",
    "coherent-mismatch",
    "twirl-compare",
    "resource-plan",
)

DEFAULTS: dict[str, dict] = {
    "suppression-sweep": {
        "N": 6, "blocks": 5, "two_qubit_error": 0.005, "single_qubit_error": 0.0005,
        "observables": 100, "include_identity": False, "n_max": 4, "methods": ["A", "B"],
        "commuting_trace_distance": 0.01,
    },
    "derangement-zne": {
        "n": 3, "N": 3, "states": 50, "eps_base": 1e-3, "eps_max": 1e-2, "max_points": 7,
        "noise_family": "depolarizing", "prep_blocks": 2,
        "prep_two_qubit_error": 0.005, "prep_single_qubit_error": 0.0005,
    },
    "ground-state": {
        "N": 4, "J": 0.1, "omega": "seed:7", "layers": 3, "iterations": 300, "n": 2,
        "xi": [0.1, 0.3, 0.5, 1.0], "damping_ratio": 0.1, "depolarizing_ratio": 0.07,
        "two_qubit_factor": 5.0, "zne_points": 6, "zne_degree": 3,
        "noisy_derangement": True, "gateset": "XX",
    },
    "coherent-mismatch": {
        "N": 4, "blocks": 2, "eps": [0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
        "nu_blocks": [2, 4, 6, 8, 10, 12, 14, 16, 18, 20], "nu_eps": 1e-3, "nu_circuits": 5,
        "single_qubit_ratio": 0.1,
    },
    "twirl-compare": {
        "N": 2, "n": 2, "observables": 20, "twirls": 20, "xi": [0.2, 0.5, 1.0, 2.0],
        "gateset": "XX", "damping_ratio": 0.1, "depolarizing_ratio": 0.07, "two_qubit_factor": 5.0,
    },
    "resource-plan": {
        "precision": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], "lam": [0.51], "p_max": [0.026],
    },
}


class ConfigError(ValueError):
    """The experiment config failed validation."""


# -- configuration -----------------------------------------------------------------

def _check_type(key: str, value, default) -> None:
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok and isinstance(default, int) and not isinstance(default, bool):
            ok = float(value).is_integer()
    elif isinstance(default, list):
        ok = isinstance(value, list) and len(value) > 0
    else:
        ok = isinstance(value, type(default)) or isinstance(value, list)
    if not ok:
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}")


def resolve_config(experiment: str, user: dict | None = None) -> dict:
    """Defaults overlaid with ``user``; unknown keys and bad types raise ConfigError."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    cfg = copy.deepcopy(DEFAULTS[experiment])
    user = dict(user or {})
    named = user.pop("experiment", experiment)
    if named != experiment:
        raise ConfigError(f"config is for {named!r}, not {experiment!r}")
    user.pop("seed", None)
    for key, value in user.items():
        if key not in cfg:
            raise ConfigError(f"unknown key {key!r} for {experiment}; known: {sorted(cfg)}")
        _check_type(key, value, cfg[key])
        cfg[key] = value
    _validate(experiment, cfg)
    return cfg


def _validate(experiment: str, cfg: dict) -> None:
    def need(cond: bool, msg: str):
        if not cond:
            raise ConfigError(msg)

    for key in ("N", "n", "blocks", "layers", "states", "observables", "twirls", "n_max"):
        if key in cfg:
            need(cfg[key] >= 1, f"{key} must be positive")
    if experiment == "suppression-sweep":
        need(cfg["N"] <= 12, "N above 12 exceeds the density-matrix cap")
        need(all(m in ("A", "B") for m in cfg["methods"]), "methods must be A or B")
    if experiment in ("derangement-zne", "ground-state", "twirl-compare"):
        need(cfg["n"] >= 2, "n must be at least 2")
        need(cfg["n"] * cfg["N"] + 1 <= DEFAULT_QUBIT_CAP,
             f"n N + 1 = {cfg['n'] * cfg['N'] + 1} exceeds the full-circuit cap {DEFAULT_QUBIT_CAP}")
    if experiment == "derangement-zne":
        need(0 < cfg["eps_base"] < cfg["eps_max"] <= 1, "need 0 < eps_base < eps_max <= 1")
        need(cfg["max_points"] >= 2, "max_points must be at least 2")
    if experiment in ("ground-state", "twirl-compare"):
        need(all(x >= 0 for x in cfg["xi"]), "xi values must be non-negative")
    if experiment == "coherent-mismatch":
        need(all(0 <= e <= 0.5 for e in cfg["eps"]), "eps values must lie in [0, 0.5]")
        need(cfg["nu_circuits"] >= 1, "nu_circuits must be positive")


def config_hash(experiment: str, cfg: dict, seed: int) -> str:
    blob = json.dumps({"experiment": experiment, "config": cfg, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path: str | Path) -> dict:
    """Read a YAML or JSON config file into a dict."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        data = json.loads(text)
    else:
        import yaml
        data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


# -- seeding and scheduling --------------------------------------------------------

def cell_rng(seed: int, experiment: str, *index) -> np.random.Generator:
    """Stream for one cell, fixed by the master seed, experiment name and cell index."""
    words = [int(seed), zlib.crc32(experiment.encode())]
    for i in index:
        words.append(zlib.crc32(i.encode()) if isinstance(i, str) else int(i))
    return np.random.default_rng(np.random.SeedSequence(words))


def run_cells(fn: Callable, cells: Sequence, workers: int = 1) -> list:
    """``[fn(c) for c in cells]``, optionally over a process pool, in cell order."""
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


# -- result table --------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


@dataclass
class ResultTable:
    experiment: str
    header: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.header):
                raise ValueError(f"row {r} does not match header {self.header}")

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def select(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            d = dict(zip(self.header, r))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.experiment}.csv"
        json_path = out / f"{self.experiment}.summary.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True, default=_json_default) + "\n")
        return csv_path, json_path


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _median(values) -> float:
    v = [x for x in values if isinstance(x, (int, float)) and math.isfinite(x)]
    return float(np.median(v)) if v else math.nan


# -- suppression sweep ---------------------------------------------------------------

def _zero_state(N: int) -> np.ndarray:
    psi = np.zeros(1 << N, dtype=np.complex128)
    psi[0] = 1
    return pure_state(psi)


def _method_bound(method: str, q: float) -> float:
    return 2 * q / (1 + q) if method == "A" else q


def _commuting_copies(rho_vals: np.ndarray, vecs: np.ndarray, count: int, distance: float,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """Copies sharing the eigenbasis whose spectra sit at trace distance ``distance``."""
    out = []
    for _ in range(count):
        q = rng.dirichlet(np.ones(len(rho_vals)))
        td = 0.5 * float(np.abs(q - rho_vals).sum())
        t = min(1.0, distance / td)
        w = (1 - t) * rho_vals + t * q
        out.append((vecs * w) @ vecs.conj().T)
    return out


def run_suppression_sweep(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    N = cfg["N"]
    rng = cell_rng(seed, "suppression-sweep", "state")
    circuit = build_alternating_ansatz(N, cfg["blocks"], seed=int(rng.integers(1 << 31)))
    rho = run_circuit(_zero_state(N), circuit, ansatz_noise(cfg["two_qubit_error"], cfg["single_qubit_error"]))
    sd = spectral_data(rho, keep_vectors=True)
    psi = sd.dominant_vector
    paulis = random_pauli_strings(N, cfg["observables"], cell_rng(seed, "suppression-sweep", "paulis"),
                                  include_identity=cfg["include_identity"])
    ideal = [vector_expectation(psi, p) for p in paulis]

    header = ["mode", "n", "method", "observable", "error", "bound_entropy", "bound_general"]
    rows = []
    for n in range(1, cfg["n_max"] + 1):
        q_ent = bound_qn_entropy(sd.lam, sd.error_probs, n)
        q_gen = bound_qn_general(sd.lam, sd.p_max, n)
        p_prime = prob0_identical(rho, n)
        for p, want in zip(paulis, ideal):
            p0 = prob0_identical(rho, n, p)
            for m in cfg["methods"]:
                value = method_a(p0, p_prime) if m == "A" else method_b(p0, sd.lam, n)
                rows.append(("identical", n, m, p.letters, abs(value - want),
                             _method_bound(m, q_ent), _method_bound(m, q_gen)))

    # copies with slightly different spectra in a shared eigenbasis
    w, v = np.linalg.eigh(rho)
    order = np.argsort(w)[::-1]
    w, v = np.clip(w[order], 0, None), v[:, order]
    copies = _commuting_copies(w, v, cfg["n_max"], cfg["commuting_trace_distance"],
                               cell_rng(seed, "suppression-sweep", "commuting"))
    cdata = [spectral_data(c) for c in copies]
    for n in range(1, cfg["n_max"] + 1):
        use, data = copies[:n], cdata[:n]
        lam_min = min(d.lam for d in data)
        size = max(d.error_probs.size for d in data)
        pm = np.zeros(size)
        for d in data:
            pm[:d.error_probs.size] = np.maximum(pm[:d.error_probs.size], d.error_probs)
        eff = bound_qn_effective(lam_min, pm, n).value
        gen = (1 / lam_min - 1) ** n * float(pm.max()) ** (n - 1) * float(pm.sum()) if pm.size else 0.0
        lam_prod = float(np.prod([d.lam for d in data]))
        p_prime = prob0_fast(use, None, include_observable=False)
        for p, want in zip(paulis, ideal):
            p0 = prob0_fast(use, p)
            for m in cfg["methods"]:
                value = method_a(p0, p_prime) if m == "A" else (2 * p0 - 1) / lam_prod
                rows.append(("commuting", n, m, p.letters, abs(value - want),
                             _method_bound(m, eff), _method_bound(m, gen)))

    violations = sum(1 for r in rows if r[4] > r[5] * (1 + 1e-9) + 1e-14 or r[4] > r[6] * (1 + 1e-9) + 1e-14)
    summary = {
        "lambda": sd.lam, "p_max": sd.p_max, "Q": (1 / sd.lam - 1) * sd.p_max,
        "renyi_2": sd.renyi.get(2), "noisy_gates": len(circuit), "bound_violations": violations,
    }
    return ResultTable("suppression-sweep", header, rows, {"summary": summary})


# -- derangement noise ZNE -----------------------------------------------------------

def _zne_state_cell(args) -> list[tuple]:
    cfg, seed, state_id = args
    n, N = cfg["n"], cfg["N"]
    rng = cell_rng(seed, "derangement-zne", state_id)
    prep = build_alternating_ansatz(N, cfg["prep_blocks"], seed=int(rng.integers(1 << 31)))
    rho = run_circuit(_zero_state(N), prep,
                      ansatz_noise(cfg["prep_two_qubit_error"], cfg["prep_single_qubit_error"]))
    sigma = random_pauli_strings(N, 1, rng)[0]
    copies = [rho] * n
    spec = EsdCircuitSpec(n, N, sigma)
    ideal = prob0_fast(copies, sigma)
    base = cfg["eps_base"]
    nm = NoiseModel({"CSWAP": [NoiseEntry(cfg["noise_family"], base)]})
    cache: dict[float, float] = {}

    def value(eps: float) -> float:
        key = round(float(eps), 15)
        if key not in cache:
            cache[key] = prob0_circuit(copies, spec, nm, eps_scale=eps / base)
        return cache[key]

    nu = N * (n - 1)
    rows = [(state_id, sigma.letters, "none", 1, 0, abs(value(base) - ideal))]
    for k in range(2, cfg["max_points"] + 1):
        grid = np.linspace(base, cfg["eps_max"], k)
        series = NoiseScaleSeries(grid, np.array([value(e) for e in grid]))
        fits = [("linear", fit_polynomial(series, 1)), ("poly", fit_polynomial(series, k - 1))]
        if k == nu + 1:
            fits.append(("exact_interp", fits[-1][1]))
        if k >= 6:
            try:
                fits.append(("pade33", fit_pade33(series)))
            except FitRejected:
                fits.append(("pade33", None))
        for kind, fit in fits:
            degree = 1 if kind == "linear" else (k - 1 if kind in ("poly", "exact_interp") else 3)
            err = math.nan if fit is None else abs(fit.zero_noise_value - ideal)
            rows.append((state_id, sigma.letters, kind, k, degree, err))
    return rows


def run_derangement_zne(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    cells = [(cfg, seed, s) for s in range(cfg["states"])]
    rows = [r for chunk in run_cells(_zne_state_cell, cells, workers) for r in chunk]
    header = ["state_id", "observable", "fit_kind", "points", "degree", "extrapolation_error"]
    table = ResultTable("derangement-zne", header, rows)
    kmax = cfg["max_points"]
    summary = {
        "max_unmitigated": max(r[5] for r in rows if r[2] == "none"),
        "median_unmitigated": _median(r[5] for r in rows if r[2] == "none"),
        "median_linear": {k: _median(r[5] for r in rows if r[2] == "linear" and r[3] == k)
                          for k in range(2, kmax + 1)},
        "median_poly_by_degree": {k - 1: _median(r[5] for r in rows if r[2] == "poly" and r[3] == k)
                                  for k in range(2, kmax + 1)},
        "median_pade33": {k: _median(r[5] for r in rows if r[2] == "pade33" and r[3] == k)
                          for k in range(6, kmax + 1)},
        "pade_rejections": sum(1 for r in rows if r[2] == "pade33" and math.isnan(r[5])),
        "noisy_cswaps": cfg["N"] * (cfg["n"] - 1),
    }
    table.metadata["summary"] = summary
    return table


# -- ground state -------------------------------------------------------------------

def eps_for_xi(circuit: Circuit, make_noise: Callable[[float], NoiseModel], xi: float,
               eps_max: float = 0.1) -> float:
    """Per-gate rate giving ``xi`` expected errors on ``circuit`` (0 for xi = 0)."""
    if xi == 0:
        return 0.0
    f = lambda e: circuit.expected_errors(make_noise(e)) - xi
    if f(eps_max) < 0:
        raise ConfigError(f"xi = {xi} needs a per-gate rate above {eps_max}")
    return float(brentq(f, 0.0, eps_max, xtol=1e-15, rtol=1e-13))


def native_cswaps(gateset: str, with_local: bool = True) -> NativeCswaps:
    """Recompiled CSWAP blocks with fused single-qubit rotations."""
    def block(t):
        return merge_single_qubit_gates(recompiled_circuit(recompile(gateset, t), include_pair_unitary=False))
    if not with_local:
        return NativeCswaps(block("A"))
    return NativeCswaps(block("A"), block("B"), block("C"))


def _ground_state_setup(cfg: dict, seed: int) -> dict:
    spec = SpinRingSpec.from_config({"N": cfg["N"], "J": cfg["J"], "omega": cfg["omega"]})
    h = build_spin_ring(spec)
    e0, _ = exact_ground_energy(h)
    opt = optimize_vha(spec, cfg["layers"], OptimizerConfig(iterations=cfg["iterations"]),
                       seed=int(cell_rng(seed, "ground-state", "optimizer").integers(1 << 31)))
    return {"spec": spec, "h": h, "e0": e0, "params": opt.params, "ansatz_energy": opt.energy,
            "converged": opt.converged}


def _ground_state_cell(args) -> tuple:
    cfg, setup, xi = args
    spec, h, e0, params = setup["spec"], setup["h"], setup["e0"], setup["params"]
    n = cfg["n"]

    def noise(e):
        return hardware_noise(e, cfg["damping_ratio"], cfg["depolarizing_ratio"], cfg["two_qubit_factor"])

    prep = build_vha(spec, params, native=True)
    eps = eps_for_xi(prep, noise, xi)
    nm = noise(eps)
    rho = noisy_vha_state(spec, params, nm)
    raw = expectation(rho, h)
    scales = np.linspace(1.0, 2.0, cfg["zne_points"])
    if eps > 0:
        values = [raw] + [expectation(noisy_vha_state(spec, params, nm, s), h) for s in scales[1:]]
        zne = fit_polynomial(NoiseScaleSeries(scales * eps, np.array(values)), cfg["zne_degree"]).zero_noise_value
    else:
        zne = raw
    esd = energy_with_esd(rho, h, n).energy
    spectral = spectral_energy(rho, h, n)
    sd = spectral_data(rho)
    floor = abs(vector_expectation(sd.dominant_vector, h) - e0)
    esd_noisy = esd_zne = math.nan
    if cfg["noisy_derangement"]:
        native = native_cswaps(cfg["gateset"])
        if eps > 0:
            vals = [energy_with_esd(rho, h, n, derangement_noise=nm, eps_scale=s, cswap=native).energy
                    for s in scales]
            esd_noisy = vals[0]
            esd_zne = fit_polynomial(NoiseScaleSeries(scales * eps, np.array(vals)),
                                     cfg["zne_degree"]).zero_noise_value
        else:
            esd_noisy = esd_zne = energy_with_esd(rho, h, n, derangement_noise=nm, cswap=native).energy
    err = lambda x: abs(x - e0) if math.isfinite(x) else math.nan
    return (xi, eps, sd.lam, err(raw), err(zne), err(esd), err(esd_noisy), err(esd_zne),
            err(spectral), floor, abs(esd - spectral))


def run_ground_state(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    setup = _ground_state_setup(cfg, seed)
    cells = [(cfg, setup, float(x)) for x in cfg["xi"]]
    rows = run_cells(_ground_state_cell, cells, workers)
    header = ["xi", "eps", "lambda", "raw_error", "zne_error", "esd_error", "esd_noisy_error",
              "esd_plus_zne_error", "spectral_dashed", "coherent_floor", "esd_vs_spectral"]
    floor = setup["ansatz_energy"] - setup["e0"]
    summary = {
        "exact_ground_energy": setup["e0"], "ansatz_energy": setup["ansatz_energy"],
        "ansatz_floor": floor, "optimizer_converged": setup["converged"],
        "omega": list(setup["spec"].omega),
    }
    return ResultTable("ground-state", header, rows, {"summary": summary})


# -- coherent mismatch ----------------------------------------------------------------

def _mismatch_cell(args) -> tuple:
    cfg, seed, sweep, blocks, eps = args
    N = cfg["N"]
    bmax = max(max(cfg["nu_blocks"]), cfg["blocks"])
    circuits = 1 if sweep == "eps" else cfg["nu_circuits"]
    nm = ansatz_noise(eps, cfg["single_qubit_ratio"] * eps)
    psi0 = np.zeros(1 << N, dtype=np.complex128)
    psi0[0] = 1
    c_sum = lam_sum = 0.0
    for k in range(circuits):
        # nested prefixes of one deep circuit, so the nu sweep adds gates to a fixed circuit
        full = build_alternating_ansatz(N, bmax, seed=int(cell_rng(seed, "coherent-mismatch", "circuit", k)
                                                          .integers(1 << 31)))
        circuit = Circuit(N, full.gates[:N + 3 * N * blocks])
        rho = run_circuit(pure_state(psi0), circuit, nm)
        c_sum += coherent_mismatch(rho, run_pure(psi0, circuit)).c
        lam_sum += spectral_data(rho).lam
    c, lam = c_sum / circuits, lam_sum / circuits
    eta1 = 1 - c
    return (sweep, blocks, N + 3 * N * blocks, eps, circuits, c, eta1, lam, lam / eta1)


def run_coherent_mismatch(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    cells = [(cfg, seed, "eps", cfg["blocks"], float(e)) for e in cfg["eps"]]
    cells += [(cfg, seed, "nu", int(b), float(cfg["nu_eps"])) for b in cfg["nu_blocks"]]
    rows = run_cells(_mismatch_cell, cells, workers)
    header = ["sweep", "blocks", "nu", "eps", "circuits", "c", "eta1", "eta2", "ratio"]
    eps_rows = [r for r in rows if r[0] == "eps" and 1e-4 <= r[3] <= 1e-2 and r[5] > 0]
    summary = {}
    if len(eps_rows) >= 2:
        slope = np.polyfit(np.log([r[3] for r in eps_rows]), np.log([r[5] for r in eps_rows]), 1)[0]
        summary["eps_loglog_slope"] = float(slope)
    nu_rows = [r for r in rows if r[0] == "nu"]
    if len(nu_rows) >= 3:
        summary["nu_linear_correlation"] = float(np.corrcoef([r[2] for r in nu_rows], [r[5] for r in nu_rows])[0, 1])
    return ResultTable("coherent-mismatch", header, rows, {"summary": summary})


# -- twirl comparison ---------------------------------------------------------------

def _random_string(N: int, rng: np.random.Generator) -> PauliString:
    return PauliString("".join("IXYZ"[i] for i in rng.integers(0, 4, N)))


def twirled_method_a(copies, sigma: PauliString, twirls, nm, native, eps_scale: float = 1.0) -> float:
    """Method A with both probabilities averaged over the given twirl frames."""
    n, N = len(copies), sigma.qubit_count
    p0 = pp = 0.0
    for frame in twirls:
        p0 += prob0_circuit(copies, EsdCircuitSpec(n, N, sigma, twirl=frame), nm, eps_scale, cswap=native)
        pp += prob0_circuit(copies, EsdCircuitSpec(n, N, PauliString.identity(N), include_observable=False,
                                                   twirl=frame), nm, eps_scale, cswap=native)
    return method_a(p0 / len(twirls), pp / len(twirls))


def _twirl_cell(args) -> tuple:
    cfg, seed, xi = args
    n, N = cfg["n"], cfg["N"]
    rho = random_density_matrix(N, cell_rng(seed, "twirl-compare", "state"))
    copies = [rho] * n
    sigmas = random_pauli_strings(N, cfg["observables"], cell_rng(seed, "twirl-compare", "observables"))
    trng = cell_rng(seed, "twirl-compare", "twirls")
    twirls = [tuple(_random_string(N, trng) for _ in range(n)) for _ in range(cfg["twirls"])]
    native = native_cswaps(cfg["gateset"], with_local=False)

    def noise(e):
        return hardware_noise(e, cfg["damping_ratio"], cfg["depolarizing_ratio"], cfg["two_qubit_factor"])

    plain_circuit = build_esd_circuit(EsdCircuitSpec(n, N, PauliString.identity(N), include_observable=False),
                                      cswap=native)
    eps = eps_for_xi(plain_circuit, noise, xi)
    nm = noise(eps)
    spec_prime = EsdCircuitSpec(n, N, PauliString.identity(N), include_observable=False)
    p_prime = prob0_circuit(copies, spec_prime, nm, cswap=native)
    twirl_prime = [prob0_circuit(copies, EsdCircuitSpec(n, N, PauliString.identity(N), include_observable=False,
                                                        twirl=t), nm, cswap=native) for t in twirls]
    ratios, plain_errors, twirl_errors = [], [], []
    for s in sigmas:
        ideal = prob0_fast(copies, s)
        ideal = (2 * ideal - 1) / (2 * prob0_fast(copies, None, include_observable=False) - 1)
        plain = method_a(prob0_circuit(copies, EsdCircuitSpec(n, N, s), nm, cswap=native), p_prime)
        p0_t = np.mean([prob0_circuit(copies, EsdCircuitSpec(n, N, s, twirl=t), nm, cswap=native) for t in twirls])
        tw = method_a(p0_t, float(np.mean(twirl_prime)))
        e_plain, e_twirl = abs(plain - ideal), abs(tw - ideal)
        plain_errors.append(e_plain)
        twirl_errors.append(e_twirl)
        ratios.append(e_twirl / e_plain if eps > 0 and e_plain > 0 else math.nan)
    q = np.nanquantile(ratios, [0.25, 0.5, 0.75]) if not all(map(math.isnan, ratios)) else [math.nan] * 3
    return (xi, eps, float(q[0]), float(q[1]), float(q[2]),
            float(np.median(plain_errors)), float(np.median(twirl_errors)))


def run_twirl_compare(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    cells = [(cfg, seed, float(x)) for x in cfg["xi"]]
    rows = run_cells(_twirl_cell, cells, workers)
    header = ["xi", "eps", "F_q25", "F_median", "F_q75", "median_error_plain", "median_error_twirl"]
    return ResultTable("twirl-compare", header, rows, {"summary": {"twirl_pairs": cfg["twirls"]}})


# -- resource plan ---------------------------------------------------------------------

def run_resource_plan(cfg: dict, seed: int = 0, workers: int = 1) -> ResultTable:
    header = ["precision", "lam", "p_max", "status", "n", "Q", "Q_n", "f", "shots_A1", "shots_A2", "shots_B"]
    rows, plans = [], []
    for lam in cfg["lam"]:
        for p_max in cfg["p_max"]:
            for e in cfg["precision"]:
                try:
                    plan = plan_resources(e, lam, p_max)
                except (ValueError, EstimateUndefined) as exc:
                    rows.append((e, lam, p_max, f"infeasible: {exc}", "", "", "", "", "", "", ""))
                    continue
                plans.append(json.loads(plan.to_json()))
                rows.append((e, lam, p_max, "ok", plan.n, plan.Q, plan.Q_n, plan.f,
                             plan.shots_A[0], plan.shots_A[1], plan.shots_B))
    return ResultTable("resource-plan", header, rows, {"summary": {"plans": plans}})


RUNNERS = {
    "suppression-sweep": run_suppression_sweep,
    "derangement-zne": run_derangement_zne,
    "ground-state": run_ground_state,
    "coherent-mismatch": run_coherent_mismatch,
    "twirl-compare": run_twirl_compare,
    "resource-plan": run_resource_plan,
}


def run_experiment(experiment: str, config: dict | None = None, seed: int = 0, workers: int = 1) -> ResultTable:
    """Validate the config, run the experiment and attach reproducibility metadata."""
    cfg = resolve_config(experiment, config)
    start = time.perf_counter()
    table = RUNNERS[experiment](cfg, seed, workers)
    table.metadata.update({
        "experiment": experiment,
        "seed": seed,
        "config": cfg,
        "config_hash": config_hash(experiment, cfg, seed),
        "versions": {"esdlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - start,
        "rows": len(table.rows),
    })
    return table
