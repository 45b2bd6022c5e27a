"""SNAIL potential expansion, Kerr-free flux and flux-noise damping scaling.

Energies are in angular-frequency units (hbar = 1).  The inductive
potential is ``U(phi) = -alpha E_J cos(phi) - 3 E_J cos((phi_ext - phi) / 3)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import bisect, brentq

from .errors import DomainError


@dataclass(frozen=True)
class SnailParams:
    E_C: float
    E_J: float
    alpha: float
    phi_ext: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if not (self.E_C > 0 and self.E_J > 0):
            raise DomainError("E_C and E_J must be positive")


@dataclass(frozen=True)
class SnailExpansion:
    phi_min: float
    c2: float
    c3: float
    c4: float
    omega_S: float
    flux_sensitivity: float


@dataclass(frozen=True)
class FluxNoiseModel:
    """Internal damping taken proportional to ``|dc2/dphi_ext|`` at the Kerr-free point."""

    reference_alpha: float = 0.29
    reference_damping: float = 1.0
    psd_scale: float = 1.0


# derivatives of U / E_J with respect to phi
def _u0(phi, a, f):
    return -a * np.cos(phi) - 3 * np.cos((f - phi) / 3)


def _u1(phi, a, f):
    return a * np.sin(phi) - np.sin((f - phi) / 3)


def _u2(phi, a, f):
    return a * np.cos(phi) + np.cos((f - phi) / 3) / 3


def _u3(phi, a, f):
    return -a * np.sin(phi) + np.sin((f - phi) / 3) / 9


def _u4(phi, a, f):
    return -a * np.cos(phi) - np.cos((f - phi) / 3) / 27


def potential(p: SnailParams, phi):
    return p.E_J * _u0(np.asarray(phi, dtype=float), p.alpha, p.phi_ext)


def potential_minimum(p: SnailParams, n_scan: int = 6001) -> float:
    """Global minimum of the potential over one 6*pi period near ``phi_ext / 3``."""
    a, f = p.alpha, p.phi_ext
    centre = f / 3
    grid = np.linspace(centre - 3 * np.pi, centre + 3 * np.pi, n_scan)
    i = int(np.argmin(_u0(grid, a, f)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    if not _u1(lo, a, f) < 0 < _u1(hi, a, f):
        lo, hi = grid[max(i - 3, 0)], grid[min(i + 3, n_scan - 1)]
        if not _u1(lo, a, f) < 0 < _u1(hi, a, f):
            raise DomainError(f"no bracket for the potential minimum at phi_ext = {f}")
    return float(brentq(_u1, lo, hi, args=(a, f), xtol=1e-15, rtol=4 * np.finfo(float).eps))


def expansion_coefficients(p: SnailParams) -> SnailExpansion:
    """Taylor coefficients with ``H_L = (E_J/2)(c2 x^2 + c3 x^3 + c4 x^4)``."""
    a, f = p.alpha, p.phi_ext
    phi = potential_minimum(p)
    u2, u3, u4 = _u2(phi, a, f), _u3(phi, a, f), _u4(phi, a, f)
    c2, c3, c4 = u2, u3 / 3, u4 / 12
    omega = np.sqrt(8 * p.E_C * c2 * p.E_J)
    # d phi_min / d phi_ext from the implicit stationarity condition
    theta = (f - phi) / 3
    dphi = (np.cos(theta) / 3) / u2
    dc2 = u3 * dphi - np.sin(theta) / 9
    domega = np.sqrt(8 * p.E_C * p.E_J) * dc2 / (2 * np.sqrt(c2))
    return SnailExpansion(phi, float(c2), float(c3), float(c4), float(omega), float(domega))


def c2_slope(p: SnailParams) -> float:
    """``dc2 / dphi_ext`` at the current flux."""
    e = expansion_coefficients(p)
    return e.flux_sensitivity * 2 * np.sqrt(e.c2) / np.sqrt(8 * p.E_C * p.E_J)


def kerr_free_flux(alpha: float, E_J: float = 1.0, E_C: float = 1.0, n_scan: int = 400) -> float:
    """Smallest flux in ``(0, pi)`` where ``c4`` vanishes, by bisection."""
    base = SnailParams(E_C, E_J, alpha)

    def c4(f):
        return expansion_coefficients(replace(base, phi_ext=f)).c4

    fs = np.linspace(1e-6, np.pi - 1e-6, n_scan)
    vals = np.array([c4(f) for f in fs])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if len(idx) == 0:
        raise DomainError(f"no Kerr-free point for alpha = {alpha}")
    i = int(idx[0])
    return float(bisect(c4, fs[i], fs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


def kerr_free_slope(alpha: float) -> float:
    """``|dc2/dphi_ext|`` at the Kerr-free point (independent of E_J, E_C)."""
    f = kerr_free_flux(alpha)
    return abs(c2_slope(SnailParams(1.0, 1.0, alpha, f)))


def damping_scale(alpha: float, model: FluxNoiseModel = FluxNoiseModel()) -> float:
    """Internal damping predicted for ``alpha`` relative to the calibrated reference."""
    if alpha == model.reference_alpha:
        return model.reference_damping
    return model.reference_damping * kerr_free_slope(alpha) / kerr_free_slope(model.reference_alpha)


SNAIL_COLUMNS = ["phi_ext", "phi_min", "c2", "c3", "c4", "omega_s", "domega_dphi"]


def coefficient_table(E_C: float, E_J: float, alpha: float, phi_ext_grid) -> np.ndarray:
    rows = []
    for f in phi_ext_grid:
        e = expansion_coefficients(SnailParams(E_C, E_J, alpha, float(f)))
        rows.append([f, e.phi_min, e.c2, e.c3, e.c4, e.omega_S, e.flux_sensitivity])
    return np.array(rows)


def write_table_csv(path, table: np.ndarray) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAIL_COLUMNS)
        for row in table:
            w.writerow([f"{v:.17g}" for v in row])
    return path
