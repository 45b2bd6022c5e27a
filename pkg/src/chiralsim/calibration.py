"""Parameter extraction on transmission traces.

The main fit recovers ``(g_c, gamma_e, gamma_i1, gamma_i2)`` from the
unpumped transmission.  That model depends on ``g_c`` and the internal
rates only through ``gamma_i1 + gamma_i2`` and
``4 g_c^2 + 8 g_c gamma_e + gamma_i1 gamma_i2``, so two extra inputs make
the answer unique:

* ``branch="strong"`` assumes ``|g_c| >= gamma_e`` (ratio >= 1) and
  ``branch="weak"`` assumes ``|g_c| <= gamma_e``;
* ``internal_ratio`` fixes ``gamma_i2 / gamma_i1``, e.g. from separate
  single-resonance fits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import lsq_linear, minimize
from scipy.stats import qmc

from .errors import ConvergenceError, DomainError
from .freqdomain import s21_unpumped_nonideal
from .model import TWO_PI


@dataclass(frozen=True)
class SyntheticNoiseSpec:
    """Complex Gaussian noise; ``sigma`` applies to each quadrature."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")


@dataclass(frozen=True)
class Trace:
    detuning: np.ndarray
    s21: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.detuning)) and np.all(np.isfinite(self.s21))):
            raise DomainError("trace contains non-finite values")


@dataclass
class FitResult:
    params: dict
    residual_norm: float
    curvature: dict = field(default_factory=dict)
    converged: bool = True
    n_starts: int = 1
    history: list = field(default_factory=list)

    def report(self) -> str:
        lines = [f"residual_norm = {self.residual_norm:.6g}", f"converged = {self.converged}"]
        for k, v in self.params.items():
            c = self.curvature.get(k)
            extra = f"  (curvature {c:.4g})" if c is not None else ""
            lines.append(f"{k} = {v:.10g}{extra}")
        return "\n".join(lines)


def synth_trace(params: dict, deltas, noise: SyntheticNoiseSpec = SyntheticNoiseSpec(),
                model: Optional[Callable] = None) -> Trace:
    """Model transmission on ``deltas`` plus seeded noise.

    ``params`` holds ``g_c, gamma_e, gamma_i1, gamma_i2`` unless a custom
    ``model(deltas, **params)`` is supplied.
    """
    deltas = np.asarray(deltas, dtype=float)
    f = model or s21_unpumped_nonideal
    clean = np.asarray(f(deltas, **params), dtype=complex)
    if noise.sigma > 0:
        rng = np.random.default_rng(noise.seed)
        clean = clean + noise.sigma * (rng.standard_normal(len(deltas))
                                       + 1j * rng.standard_normal(len(deltas)))
    return Trace(deltas, clean)


def _curvature(cost, x, steps) -> np.ndarray:
    """Diagonal second derivatives of ``cost`` by central differences."""
    f0 = cost(x)
    out = np.empty(len(x))
    for i, h in enumerate(steps):
        e = np.zeros(len(x))
        e[i] = h
        out[i] = (cost(x + e) - 2 * f0 + cost(x - e)) / h ** 2
    return out


def _multistart_simplex(cost, bounds, n_starts, seed, xatol=1e-9, max_polish=10):
    lo, hi = np.array(bounds).T
    sampler = qmc.LatinHypercube(d=len(lo), seed=seed)
    starts = qmc.scale(sampler.random(n_starts), lo, hi)
    history = []
    results = []

    def run(x0):
        trace = [cost(x0)]
        res = minimize(cost, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                       callback=lambda xk: trace.append(cost(xk)),
                       options={"xatol": xatol, "fatol": 1e-13, "maxiter": 20000,
                                "maxfev": 40000, "adaptive": True})
        return res, trace

    for x0 in starts:
        res, trace = run(x0)
        history.append(trace)
        results.append(res)
    best = min(results, key=lambda r: r.fun)
    # restart from the best point until the simplex stops improving
    for _ in range(max_polish):
        res, trace = run(best.x)
        history.append(trace)
        improved = res.fun < best.fun * (1 - 1e-12) or (best.fun > 0 and res.fun == 0)
        if res.fun <= best.fun:
            best = res
        if not improved:
            break
    if not any(r.success for r in results) and not best.success:
        raise ConvergenceError("no simplex start converged")
    return best, history


def fit_s21_cancellation(trace: Trace, n_starts: int = 6, branch: str = "strong",
                         internal_ratio: float = 1.0, magnitude_only: bool = False,
                         seed: int = 0, scale: Optional[float] = None) -> FitResult:
    """Fit the unpumped two-resonator transmission model.

    The searched quantities are ``gamma_e``, ``u = |g_c + gamma_e|`` and
    ``s = gamma_i1 + gamma_i2``; ``internal_ratio = gamma_i2 / gamma_i1``
    splits ``s`` into the two internal rates.  Parameters are searched in
    units of ``scale`` (default: one tenth of the detuning span, about
    ``gamma_e`` for a +-5 gamma_e trace).
    """
    if branch not in ("strong", "weak"):
        raise DomainError("branch must be 'strong' or 'weak'")
    if not internal_ratio > 0:
        raise DomainError("internal_ratio must be positive")
    d = np.asarray(trace.detuning, dtype=float)
    y = np.asarray(trace.s21, dtype=complex)
    w = scale or (d.max() - d.min()) / 10
    if w <= 0:
        raise DomainError("trace needs a finite detuning span")
    sgn = -1.0 if branch == "strong" else 1.0
    f1 = 1.0 / (1.0 + internal_ratio)

    def unpack(x):
        ge, u, si = x
        return {"g_c": (-ge + sgn * u) * w, "gamma_e": ge * w,
                "gamma_i1": si * f1 * w, "gamma_i2": si * (1 - f1) * w}

    def model(x):
        p = unpack(x)
        return s21_unpumped_nonideal(d, p["g_c"], p["gamma_e"], p["gamma_i1"], p["gamma_i2"])

    if magnitude_only:
        def cost(x):
            return float(np.sum((np.abs(model(x)) - np.abs(y)) ** 2))
    else:
        def cost(x):
            r = model(x) - y
            return float(np.sum(r.real ** 2 + r.imag ** 2))

    bounds = [(0.02, 3.0), (0.0, 3.0), (0.0, 3.0)]
    best, history = _multistart_simplex(cost, bounds, max(n_starts, 5), seed)
    params = unpack(best.x)
    curv = _curvature(cost, best.x, np.full(3, 1e-4)) / w ** 2
    return FitResult(params, float(np.sqrt(best.fun)),
                     {"gamma_e": curv[0], "g_c": curv[1], "gamma_i_sum": curv[2]},
                     bool(best.success), max(n_starts, 5), history)


def fit_cancellation_vs_detuning(detunings, ratios, gamma_geo: float) -> FitResult:
    """Fit ``ratio(D) = |g12 + g_b^2 / D| / sqrt(gamma1 gamma2)``.

    The absolute value is resolved by assuming ``g12 + g_b^2/D > 0`` on the
    data, which makes the problem linear in ``(g12, g_b^2)`` with
    ``g_b^2 >= 0``.
    """
    D = np.asarray(detunings, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if len(D) < 3:
        raise DomainError("need at least three detuning points")
    if np.ptp(D) == 0:
        raise DomainError("all detunings are equal; g12 and g_b are not separable")
    if np.any(D == 0):
        raise DomainError("detuning must be nonzero")
    A = np.stack([np.ones_like(D), 1.0 / D], axis=1)
    b = r * gamma_geo
    # column scaling keeps the solve well conditioned for GHz-scale detunings
    colscale = np.abs(A).max(axis=0)
    sol = lsq_linear(A / colscale, b, bounds=([-np.inf, 0.0], [np.inf, np.inf]),
                     method="bvls", tol=1e-15)
    g12, q = sol.x / colscale
    resid = A @ np.array([g12, q]) - b
    curv = 2 * np.sum(A ** 2, axis=0)
    return FitResult({"g12": float(g12), "g_b": float(np.sqrt(q))},
                     float(np.linalg.norm(resid) / gamma_geo),
                     {"g12": float(curv[0]), "g_b_sq": float(curv[1])}, bool(sol.success), 1)


def cancellation_curve(detunings, g12: float, g_b: float, gamma_geo: float):
    D = np.asarray(detunings, dtype=float)
    return np.abs(g12 + g_b ** 2 / D) / gamma_geo


@dataclass
class LineFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    residual_norm: float
    intercept_ok: bool


def fit_pump_linearity(amplitudes, couplings, n_sigma: float = 3.0) -> LineFit:
    """Ordinary least squares line; ``intercept_ok`` checks zero amplitude gives zero coupling."""
    x = np.asarray(amplitudes, dtype=float)
    y = np.asarray(couplings, dtype=float)
    if len(x) < 2:
        raise DomainError("need at least two points")
    if np.ptp(x) == 0:
        raise DomainError("amplitudes must not all be equal")
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.zeros(2)
    scale = max(np.abs(y).max(), 1e-300)
    ok = abs(coef[1]) <= max(n_sigma * se[1], 1e-9 * scale)
    return LineFit(float(coef[0]), float(coef[1]), float(se[0]), float(se[1]),
                   float(np.linalg.norm(resid)), bool(ok))


def lorentzian_s21(freq, f0: float, kappa_ext: float, kappa_int: float, kind: str = "hanger"):
    """Complex single-resonance response with full linewidths ``kappa``.

    ``kind="hanger"``: ``1 - kappa_ext / (kappa + 2i(f - f0))``;
    ``kind="reflection"``: ``1 - 2 kappa_ext / (kappa + 2i(f - f0))``.
    """
    kappa = kappa_ext + kappa_int
    k = 1.0 if kind == "hanger" else 2.0
    return 1 - k * kappa_ext / (kappa + 2j * (np.asarray(freq, dtype=float) - f0))


def fit_resonance(freq, s, kind: str = "hanger") -> FitResult:
    """Fit ``f0, kappa_ext, kappa_int`` of a single resonance."""
    from scipy.optimize import least_squares

    f = np.asarray(freq, dtype=float)
    s = np.asarray(s, dtype=complex)
    i0 = int(np.argmin(np.abs(s)))
    span = np.ptp(f)
    x0 = [f[i0], span / 20, span / 40]

    def resid(x):
        r = lorentzian_s21(f, *x, kind=kind) - s
        return np.concatenate([r.real, r.imag])

    sol = least_squares(resid, x0, bounds=([f.min(), 0, 0], [f.max(), span, span]),
                        x_scale=[span / 10, span / 20, span / 20], xtol=1e-14, ftol=1e-14)
    J = sol.jac
    curv = 2 * np.sum(J ** 2, axis=0)
    return FitResult({"f0": float(sol.x[0]), "kappa_ext": float(sol.x[1]), "kappa_int": float(sol.x[2])},
                     float(np.linalg.norm(sol.fun)),
                     dict(zip(["f0", "kappa_ext", "kappa_int"], curv.tolist())), bool(sol.success))


def read_trace_csv(path, center_mhz: float = 0.0) -> Trace:
    """Read a ``freq_mhz, re, im`` CSV; detuning is measured from ``center_mhz``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"freq_mhz", "re", "im"} <= set(rows[0]):
        raise DomainError("trace CSV needs columns freq_mhz, re, im")
    f = np.array([float(r["freq_mhz"]) for r in rows])
    s = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return Trace((f - center_mhz) * TWO_PI * 1e6, s)


def write_trace_csv(path, trace: Trace, center_mhz: float = 0.0) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_mhz", "re", "im"])
        for d, s in zip(trace.detuning, trace.s21):
            w.writerow([f"{d / TWO_PI / 1e6 + center_mhz:.17g}", f"{s.real:.17g}", f"{s.imag:.17g}"])
    return path
