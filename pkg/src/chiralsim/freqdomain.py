"""Frequency-domain scattering parameters of the chiral coupler.

Ports are numbered 1 (left), 2 (right) and 3 (bus mode ``b``).  A wave
entering port 1 travels rightwards, so it is the ``d_R`` input of the
line; a wave entering port 2 is the ``d_L`` input.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DomainError, GridError, SingularSystemError
from .model import CouplerParams, PumpSettings, TWO_PI

DB_CEILING = 100.0
COND_LIMIT = 1e13

# output order (L_out, R_out, b_out) equals port order 1, 2, 3;
# input order is (d_R_in, d_L_in, b_in) for ports 1, 2, 3.
_DIRECT = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)


@dataclass(frozen=True)
class SParameterMatrix:
    """3x3 scattering matrix at one detuning; ``entries[i-1, j-1] = S_ij``."""

    entries: np.ndarray
    detuning: float

    def s(self, i: int, j: int) -> complex:
        """Entry ``S_ij`` with 1-based port indices."""
        return complex(self.entries[i - 1, j - 1])

    @property
    def s21(self) -> complex:
        return self.s(2, 1)

    def unitarity_error(self) -> float:
        e = self.entries
        return float(np.max(np.abs(e.conj().T @ e - np.eye(3))))


@dataclass(frozen=True)
class IsolationMetrics:
    insertion_loss_db: float
    isolation_db: float
    isolation_bandwidth: float


def loss_db(s, ceiling: float = DB_CEILING):
    """``-20 log10 |s|`` clipped to ``ceiling``."""
    mag = np.abs(np.asarray(s))
    with np.errstate(divide="ignore"):
        val = -20.0 * np.log10(mag)
    val = np.minimum(val, ceiling) + 0.0  # avoid -0.0
    return float(val) if np.ndim(val) == 0 else val


def s21_lossless_cancelled(delta, gamma):
    """All-pass response of two cancelled quarter-wave resonators."""
    if np.any(np.asarray(gamma) <= 0):
        raise DomainError("gamma must be positive")
    delta = np.asarray(delta, dtype=float)
    out = (delta ** 2 + gamma ** 2) / (delta + 1j * gamma) ** 2
    return complex(out) if out.ndim == 0 else out


def s_matrix_closed_form(gamma: float, g: float, delta: float, phi1: float, phi2: float,
                         printed_b: bool = False) -> SParameterMatrix:
    """Analytic S matrix for the symmetric lossless coupler.

    Assumes ``gamma1 = gamma2 = gamma_b = gamma``, ``g1 = g2 = g`` and
    ``g_c = -gamma``.  ``B`` is by default the denominator that agrees with
    the equations of motion; ``printed_b=True`` uses ``4 - (2d + i gamma)^2 / g^2``
    instead, which only coincides at ``delta = 0``.
    """
    if g == 0:
        raise DomainError("closed form is singular at g = 0")
    d, y = delta, gamma
    dphi = phi1 - phi2
    A = (-4 + (d + 1j * y) * (2 * d + 1j * y) / g ** 2) * ((d + 1j * y) / g)
    if printed_b:
        B = 4 - (2 * d + 1j * y) ** 2 / g ** 2
    else:
        B = 4 - (2 * d + 1j * y) * (d + 1j * y) / g ** 2
    C = (2 * d + 1j * y) * (d ** 2 + y ** 2) / g ** 3
    D = np.exp(1j * phi1) * y * (-1j * d + y) / g ** 2
    E = np.exp(1j * phi2) * y * (d + 1j * y) / g ** 2

    s = np.empty((3, 3), dtype=complex)
    s[0, 0] = 4 * (y / g) * np.cos(dphi) / A
    s[1, 1] = s[0, 0]
    s[0, 1] = (4j * (y / g) * np.sin(dphi) - 4 * d / g + C) / A
    s[1, 0] = s[0, 1]
    s[0, 2] = 2 * (D + E) / A
    s[1, 2] = 2 * (D - E) / A
    s[2, 0] = 2 * (y / g) * (1j * np.exp(-1j * phi1) - np.exp(-1j * phi2)) / B
    s[2, 1] = 2 * (y / g) * (1j * np.exp(-1j * phi1) + np.exp(-1j * phi2)) / B
    s[2, 2] = (4 - (2 * d - 1j * y) * (d + 1j * y) / g ** 2) / B
    return SParameterMatrix(s, float(delta))


def _system(params: CouplerParams, pumps: PumpSettings):
    """Drift matrix ``M``, input matrix ``N`` and output matrix ``C``."""
    y1 = params.a1.external_coupling
    y2 = params.a2.external_coupling
    yb = params.b.external_coupling
    th = params.path_delay_phase
    eps = pumps.leakage
    k1 = pumps.g1 * np.exp(1j * pumps.phi1) + eps * pumps.g2 * np.exp(1j * pumps.phi2)
    k2 = pumps.g2 * np.exp(1j * pumps.phi2) + eps * pumps.g1 * np.exp(1j * pumps.phi1)
    j12 = params.geometric_rate + params.cancellation_coupling
    M = np.array([
        [-(2 * y1 + params.a1.internal_damping) / 2, -1j * k1, -1j * j12],
        [-1j * np.conj(k1), -(yb + params.b.internal_damping) / 2, -1j * np.conj(k2)],
        [-1j * j12, -1j * k2, -(2 * y2 + params.a2.internal_damping) / 2],
    ], dtype=complex)
    N = np.array([
        [-np.sqrt(y1), -np.sqrt(y1), 0],
        [0, 0, -np.sqrt(yb)],
        [-np.sqrt(y2) * np.exp(1j * th), -np.sqrt(y2) * np.exp(-1j * th), 0],
    ], dtype=complex)
    C = np.array([
        [np.sqrt(y1), 0, np.sqrt(y2) * np.exp(1j * th)],
        [np.sqrt(y1), 0, np.sqrt(y2) * np.exp(-1j * th)],
        [0, np.sqrt(yb), 0],
    ], dtype=complex)
    return M, N, C


def s_matrix_grid(params: CouplerParams, pumps: PumpSettings, deltas) -> np.ndarray:
    """S matrices for an array of detunings, shape ``(n, 3, 3)``."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    M, N, C = _system(params, pumps)
    lhs = 1j * deltas[:, None, None] * np.eye(3) + M[None]
    cond = np.linalg.cond(lhs)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if np.any(bad):
        worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
        k = int(np.argmax(bad))
        raise SingularSystemError(
            f"equations of motion singular at detuning {deltas[k]:.6g} rad/s "
            f"(condition number {worst:.3g})", worst)
    X = np.linalg.solve(lhs, np.broadcast_to(-N, lhs.shape))
    return _DIRECT[None] + C[None] @ X


def s_matrix_numeric(params: CouplerParams, pumps: PumpSettings, delta: float) -> SParameterMatrix:
    """Solve the detuned equations of motion for the full S matrix."""
    return SParameterMatrix(s_matrix_grid(params, pumps, [delta])[0], float(delta))


def s21_unpumped_nonideal(delta, g_c, gamma_e, gamma_i1, gamma_i2):
    """Transmission with pumps off, finite internal loss and imperfect cancellation.

    Uses equal external coupling ``gamma_e`` for both a modes.
    """
    if np.any(np.asarray(gamma_e) <= 0):
        raise DomainError("gamma_e must be positive")
    d = -np.asarray(delta, dtype=float)
    common = (4 * g_c ** 2 + 8 * g_c * gamma_e - 4 * d ** 2 + gamma_i1 * gamma_i2
              + 2j * d * (gamma_i1 + gamma_i2))
    den = common + 8 * gamma_e ** 2 + 2 * gamma_e * (4j * d + gamma_i1 + gamma_i2)
    out = common / den
    return complex(out) if np.ndim(out) == 0 else out


def check_detuning_grid(deltas, gamma: float, min_points: int = 201) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or len(deltas) < min_points:
        raise GridError(f"detuning grid needs at least {min_points} points")
    if np.any(np.diff(deltas) <= 0):
        raise GridError("detuning grid must be strictly increasing")
    if deltas[0] > -5 * gamma * (1 - 1e-12) or deltas[-1] < 5 * gamma * (1 - 1e-12):
        raise GridError("detuning grid must span at least [-5 gamma, +5 gamma]")
    if not np.any(np.abs(deltas) <= 1e-12 * gamma):
        raise GridError("detuning grid must contain delta = 0")
    return deltas


def default_grid(gamma: float, span: float = 5.0, n: int = 401) -> np.ndarray:
    """Symmetric odd-length grid over ``[-span*gamma, span*gamma]`` that contains 0."""
    if n % 2 == 0:
        n += 1
    return np.linspace(-span * gamma, span * gamma, n)


def _bandwidth(deltas, iso_db, threshold=20.0) -> float:
    """Width of the contiguous region around 0 where ``iso_db`` exceeds ``threshold``."""
    i0 = int(np.argmin(np.abs(deltas)))
    if iso_db[i0] <= threshold:
        return 0.0

    def edge(step):
        i = i0
        while 0 <= i + step < len(deltas) and iso_db[i + step] > threshold:
            i += step
        j = i + step
        if not 0 <= j < len(deltas):
            return deltas[i]
        # linear interpolation of the crossing
        f = (iso_db[i] - threshold) / (iso_db[i] - iso_db[j])
        return deltas[i] + f * (deltas[j] - deltas[i])

    return float(edge(1) - edge(-1))


def isolation_metrics(params: CouplerParams, pumps: PumpSettings, deltas,
                      ceiling: float = DB_CEILING) -> IsolationMetrics:
    """Insertion loss and isolation at zero detuning plus the 20 dB bandwidth.

    The pump amplitudes and leakage of ``pumps`` are used; its ``phi1`` is
    the reference phase and ``phi2`` is set to ``phi1 -/+ pi/2``.
    """
    gamma = max(params.a1.external_coupling, params.a2.external_coupling)
    deltas = check_detuning_grid(deltas, gamma)
    pass_p = PumpSettings(pumps.g1, pumps.g2, pumps.phi1, pumps.phi1 - np.pi / 2,
                          pumps.pump_frequency, pumps.leakage)
    iso_p = PumpSettings(pumps.g1, pumps.g2, pumps.phi1, pumps.phi1 + np.pi / 2,
                         pumps.pump_frequency, pumps.leakage)
    s_pass = s_matrix_numeric(params, pass_p, 0.0).s21
    s_iso = s_matrix_grid(params, iso_p, deltas)[:, 1, 0]
    iso_db = loss_db(s_iso, ceiling)
    i0 = int(np.argmin(np.abs(deltas)))
    return IsolationMetrics(loss_db(s_pass, ceiling), float(iso_db[i0]), _bandwidth(deltas, iso_db))


def golden_section(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    inv = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimize_pump_amplitude(params: CouplerParams, pumps: PumpSettings, deltas,
                            bounds=(0.1, 3.0), objective: str = "isolation"):
    """Pump amplitude maximizing isolation (or minimizing insertion loss).

    Golden-section search over ``g`` in ``bounds`` times
    ``sqrt(gamma1 * gamma2)``.  Returns the amplitude and its metrics.
    """
    geo = params.geometric_rate

    def metrics(x):
        return isolation_metrics(params, pumps.with_amplitude(x * geo), deltas)

    def cost(x):
        m = metrics(x)
        return -m.isolation_db if objective == "isolation" else m.insertion_loss_db

    x, _ = golden_section(cost, *bounds, tol=1e-8)
    return float(x * geo), metrics(x)


TRACE_COLUMNS = ["detuning_mhz"] + [
    f"{part}_s{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3) for part in ("re", "im")
] + ["s21_db", "sb1_db"]


def trace_rows(deltas, smats: np.ndarray):
    """Rows of the trace CSV; dB columns are ``20 log10 |S|``."""
    for d, s in zip(deltas, smats):
        row = [d / TWO_PI / 1e6]
        for i in range(3):
            for j in range(3):
                row += [s[i, j].real, s[i, j].imag]
        row += [-loss_db(s[1, 0]), -loss_db(s[2, 0])]
        yield row


def write_trace_csv(path, deltas, smats: np.ndarray, db_offset: Optional[float] = None) -> Path:
    """Write S-parameter traces; ``db_offset`` is added to the dB columns."""
    path = Path(path)
    off = 0.0 if db_offset is None else db_offset
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(deltas, smats):
            row[-2] += off
            row[-1] += off
            w.writerow([f"{v:.17g}" for v in row])
    return path


def read_trace_csv(path) -> tuple:
    """Inverse of :func:`write_trace_csv` (without any dB offset)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    deltas = data[:, 0] * TWO_PI * 1e6
    comps = data[:, 1:19]
    smats = (comps[:, 0::2] + 1j * comps[:, 1::2]).reshape(-1, 3, 3)
    return deltas, smats
