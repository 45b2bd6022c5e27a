"""Semiclassical time-domain simulation of shaped emission and absorption.

Mode amplitudes are integrated in the frame rotating at the mode
frequencies with a fixed-step RK4 scheme.  Waveguide inputs are the
complex envelopes of ``d_R`` (entering port 1), ``d_L`` (entering
port 2) and ``b_in``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from .errors import ConvergenceError, DomainError, GridError
from .freqdomain import _system
from .model import CouplerParams, PumpSettings, WavepacketSpec

STEPS_PER_RATE = 50


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise GridError("t_end must exceed t_start")
        if not self.dt > 0:
            raise GridError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return int(np.ceil((self.t_end - self.t_start) / self.dt - 1e-9))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def check(self, max_rate: float) -> None:
        """Raise unless ``dt`` resolves the fastest rate in the problem."""
        if max_rate > 0 and self.dt > 1.0 / (STEPS_PER_RATE * max_rate) * (1 + 1e-12):
            raise GridError(
                f"dt = {self.dt:.3g} s exceeds 1/(50 * {max_rate:.3g}/s); refine the grid")

    @classmethod
    def for_rate(cls, t_start: float, t_end: float, max_rate: float,
                 steps_per_rate: float = STEPS_PER_RATE) -> "TimeGrid":
        return cls(t_start, t_end, 1.0 / (steps_per_rate * max_rate))


def _const(value):
    return lambda t: np.full_like(np.asarray(t, dtype=float), value)


@dataclass(frozen=True)
class DriveEnvelope:
    """Time-dependent pump magnitudes with constant phases.

    ``g1`` and ``g2`` are vectorized callables returning rates in rad/s.
    """

    g1: Callable
    g2: Callable
    phi1: float = 0.0
    phi2: float = np.pi / 2
    leakage: float = 0.0

    @classmethod
    def constant(cls, pumps: PumpSettings) -> "DriveEnvelope":
        return cls(_const(pumps.g1), _const(pumps.g2), pumps.phi1, pumps.phi2, pumps.leakage)

    @classmethod
    def emission(cls, gamma: float, spec: WavepacketSpec, phi1: float = 0.0,
                 phi2: Optional[float] = None, absorb: bool = False) -> "DriveEnvelope":
        """Envelope releasing (or, with ``absorb``, catching) a sech photon.

        If ``phi2`` is omitted the phases are chosen for the direction in
        ``spec``: rightward needs ``phi1 - phi2 = -pi/2``.
        """
        emission_pump_envelope(gamma, spec, 0.0)  # validates the domain
        if phi2 is None:
            phi2 = phi1 + (np.pi / 2 if spec.direction == "right" else -np.pi / 2)
        sign = -1.0 if absorb else 1.0

        def g(t):
            return emission_pump_envelope(gamma, spec, sign * np.asarray(t, dtype=float))

        return cls(g, g, phi1, phi2)

    def samples(self, times):
        """Pump magnitudes on ``times`` as two arrays."""
        t = np.asarray(times, dtype=float)
        g1 = np.asarray(self.g1(t), dtype=float) * np.ones_like(t)
        g2 = np.asarray(self.g2(t), dtype=float) * np.ones_like(t)
        if np.any(g1 < 0) or np.any(g2 < 0) or not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
            raise DomainError("pump envelope must be finite and non-negative")
        return g1, g2


def sech_wavepacket(spec: WavepacketSpec, t):
    """Normalized single-photon amplitude ``sqrt(gph)/2 * sech(gph t / 2)``."""
    x = spec.gamma_ph * np.asarray(t, dtype=float) / 2
    # 1/cosh(x) = 2 e^{-|x|} / (1 + e^{-2|x|}), safe for large |x|
    e = np.exp(-np.abs(x))
    return np.sqrt(spec.gamma_ph) / 2 * 2 * e / (1 + e * e)


def emission_pump_envelope(gamma: float, spec: WavepacketSpec, t):
    """Pump magnitude that releases a sech wavepacket from the bus mode.

    ``gamma`` is the waveguide coupling of each a mode.  The squared
    cosh factor is evaluated as ``(1 + exp(-2x)) / 2`` to avoid overflow.
    """
    gph = spec.gamma_ph
    if gph >= 2 * gamma:
        raise DomainError(f"gamma_ph = {gph:.6g} must be below 2 * gamma = {2 * gamma:.6g}")
    t = np.asarray(t, dtype=float)
    x = gph * t / 2
    with np.errstate(over="ignore"):
        e2 = np.exp(-2 * x)
        radicand = gamma * (1 + e2) / 4 - gph / 8
    bad = ~(radicand > 0)
    if np.any(bad):
        t_bad = np.atleast_1d(t)[np.atleast_1d(bad)][0] if t.ndim else float(t)
        raise DomainError(f"pump envelope radicand is non-positive at t = {t_bad:.6g} s")
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.sqrt(gph) * (2 * gamma - gph * np.tanh(x)) / (8 * np.sqrt(radicand))
    g = np.where(np.isinf(radicand), 0.0, g)
    return float(g) if g.ndim == 0 else g


def emission_tail_time(spec: WavepacketSpec, residual: float = 1e-4) -> float:
    """Time after which the wavepacket has less than ``residual`` weight left."""
    return 2.0 / spec.gamma_ph * np.arctanh(1 - 2 * residual)


@dataclass
class FieldRecord:
    times: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.a1) ** 2 + np.abs(self.a2) ** 2 + np.abs(self.b) ** 2


@dataclass
class FluxRecord:
    """Output photon fluxes on the time grid (photons/s)."""

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    b: np.ndarray
    input_power: np.ndarray
    g1: np.ndarray = field(default=None)
    g2: np.ndarray = field(default=None)

    def integrate(self, which: str) -> float:
        return float(np.trapezoid(getattr(self, which), self.times))


@dataclass(frozen=True)
class EmissionMetrics:
    total_photons: float
    right_fraction: float
    left_fraction: float
    efficiency: float


def max_rate(params: CouplerParams, drive_peak: float = 0.0, gamma_ph: float = 0.0) -> float:
    rates = [2 * params.a1.external_coupling + params.a1.internal_damping,
             2 * params.a2.external_coupling + params.a2.internal_damping,
             params.b.external_coupling + params.b.internal_damping,
             abs(params.cancellation_coupling), params.geometric_rate, drive_peak, gamma_ph]
    return float(max(rates))


def _port_input(inputs, port, times):
    f = inputs.get(port) if inputs else None
    if f is None:
        return np.zeros(len(times), dtype=complex)
    return np.asarray(f(times), dtype=complex) * np.ones(len(times))


def simulate_semiclassical(params: CouplerParams, drive: DriveEnvelope, grid: TimeGrid,
                           inputs: Optional[Dict[int, Callable]] = None,
                           initial=(0.0, 0.0, 0.0), gamma_ph: float = 0.0,
                           stop: Optional[Callable] = None):
    """Integrate the coupled-mode equations with RK4.

    ``inputs`` maps port number (1, 2, 3) to a vectorized complex waveform.
    ``stop(t, x)`` may end the run early once it returns True; it is
    checked after every step.  Returns ``(FieldRecord, FluxRecord)``.
    """
    times = grid.times
    half = times[:-1] + grid.dt / 2
    g1, g2 = drive.samples(times)
    g1h, g2h = drive.samples(half)
    grid.check(max_rate(params, max(g1.max(), g2.max()), gamma_ph))

    base = PumpSettings(0.0, 0.0, drive.phi1, drive.phi2, leakage=drive.leakage)
    M0, N, C = _system(params, base)
    P1 = _system(params, PumpSettings(1.0, 0.0, drive.phi1, drive.phi2, leakage=drive.leakage))[0] - M0
    P2 = _system(params, PumpSettings(0.0, 1.0, drive.phi1, drive.phi2, leakage=drive.leakage))[0] - M0

    # inputs in port order -> (d_R, d_L, b_in)
    u = np.stack([_port_input(inputs, p, times) for p in (1, 2, 3)], axis=1)
    uh = np.stack([_port_input(inputs, p, half) for p in (1, 2, 3)], axis=1)
    Nu, Nuh = u @ N.T, uh @ N.T

    n = len(times)
    x = np.zeros((n, 3), dtype=complex)
    x[0] = np.asarray(initial, dtype=complex)[[0, 2, 1]]  # (a1, a2, b) -> (a1, b, a2)
    last = n - 1
    dt = grid.dt
    for k in range(n - 1):
        Ma = M0 + g1[k] * P1 + g2[k] * P2
        Mh = M0 + g1h[k] * P1 + g2h[k] * P2
        Mb = M0 + g1[k + 1] * P1 + g2[k + 1] * P2
        xk = x[k]
        k1 = Ma @ xk + Nu[k]
        k2 = Mh @ (xk + dt / 2 * k1) + Nuh[k]
        k3 = Mh @ (xk + dt / 2 * k2) + Nuh[k]
        k4 = Mb @ (xk + dt * k3) + Nu[k + 1]
        x[k + 1] = xk + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if stop is not None and stop(times[k + 1], x[k + 1]):
            last = k + 1
            break
    sl = slice(0, last + 1)
    times, x, u = times[sl], x[sl], u[sl]
    out = u @ np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]]).T + x @ C.T
    fields = FieldRecord(times, x[:, 0], x[:, 2], x[:, 1])
    flux = FluxRecord(times, np.abs(out[:, 0]) ** 2, np.abs(out[:, 1]) ** 2, np.abs(out[:, 2]) ** 2,
                      np.sum(np.abs(u) ** 2, axis=1), g1[sl], g2[sl])
    return fields, flux


def emission_metrics(flux: FluxRecord, initial_photons: float = 1.0,
                     direction: str = "right") -> EmissionMetrics:
    left, right = flux.integrate("left"), flux.integrate("right")
    total = left + right + flux.integrate("b")
    emitted = left + right
    rf = right / emitted if emitted > 0 else 0.0
    lf = left / emitted if emitted > 0 else 0.0
    target = right if direction == "right" else left
    return EmissionMetrics(total, rf, lf, target / initial_photons)


def emission_run(params: CouplerParams, spec: WavepacketSpec, phi1: float = 0.0,
                 phi2: Optional[float] = None, residual: float = 1e-4,
                 steps_per_rate: float = STEPS_PER_RATE):
    """Release one photon from ``b`` with the matched pump envelope.

    The window starts at ``-8 / gamma_ph`` and ends once the bus-mode
    population falls below ``residual``.
    """
    gamma = params.geometric_rate
    drive = DriveEnvelope.emission(gamma, spec, phi1, phi2)
    t0 = -8.0 / spec.gamma_ph
    t1 = 4 * emission_tail_time(spec, residual) + 40.0 / gamma
    peak = max(drive.samples(np.linspace(t0, t1, 2001))[0].max(), 0.0)
    grid = TimeGrid.for_rate(t0, t1, max_rate(params, peak, spec.gamma_ph), steps_per_rate)
    t_min = emission_tail_time(spec, residual)

    def stop(t, x):
        return t >= t_min and abs(x[1]) ** 2 < residual

    return simulate_semiclassical(params, drive, grid, initial=(0, 0, 1), gamma_ph=spec.gamma_ph,
                                  stop=stop)


def absorption_run(params: CouplerParams, spec: WavepacketSpec, phi1: float = 0.0,
                   phi2: Optional[float] = None, residual: float = 1e-4,
                   steps_per_rate: float = STEPS_PER_RATE):
    """Catch a sech photon arriving from the side given by ``spec.direction``.

    A rightward photon enters at port 1.  The window is the mirror of the
    emission window, ``[-T_stop, 8 / gamma_ph]``.
    """
    gamma = params.geometric_rate
    drive = DriveEnvelope.emission(gamma, spec, phi1, phi2, absorb=True)
    t0 = -emission_tail_time(spec, residual) * 2
    t1 = 8.0 / spec.gamma_ph
    peak = drive.samples(np.linspace(t0, t1, 2001))[0].max()
    grid = TimeGrid.for_rate(t0, t1, max_rate(params, peak, spec.gamma_ph), steps_per_rate)
    port = 1 if spec.direction == "right" else 2
    inputs = {port: lambda t: sech_wavepacket(spec, t)}
    return simulate_semiclassical(params, drive, grid, inputs=inputs, gamma_ph=spec.gamma_ph)


def _slowest_decay(params: CouplerParams, pumps: PumpSettings) -> float:
    M = _system(params, pumps)[0]
    rate = float(np.min(-np.linalg.eigvals(M).real))
    if rate <= 0:
        raise ConvergenceError("system has an undamped mode; no steady state exists")
    return rate


def steady_state_response(params: CouplerParams, pumps: PumpSettings, delta: float,
                          input_port: int = 1, output_port: int = 2,
                          n_decay: float = 30.0, rel_tol: float = 1e-6,
                          steps_per_rate: float = 100) -> complex:
    """Output/input ratio of a driven time-domain run after transients decay.

    The input at ``input_port`` is ``exp(-i delta t)`` with unit amplitude.
    """
    slow = _slowest_decay(params, pumps)
    t_end = max(n_decay, 20.0) / slow
    rate = max(max_rate(params, max(pumps.g1, pumps.g2)), abs(delta))
    grid = TimeGrid.for_rate(0.0, t_end, rate, steps_per_rate)
    inputs = {input_port: lambda t: np.exp(-1j * delta * t)}
    fields, _ = simulate_semiclassical(params, DriveEnvelope.constant(pumps), grid, inputs=inputs)
    t = fields.times
    _, N, C = _system(params, pumps)
    x = np.stack([fields.a1, fields.b, fields.a2], axis=1)
    direct = {(1, 2): 1.0, (2, 1): 1.0, (3, 3): 1.0}.get((output_port, input_port), 0.0)
    ratio = direct + (x @ C.T)[:, output_port - 1] / np.exp(-1j * delta * t)
    tail = ratio[int(0.9 * len(ratio)):]
    drift = np.max(np.abs(tail - tail[-1])) / max(abs(tail[-1]), 1e-300)
    if drift > rel_tol:
        raise ConvergenceError(f"steady amplitude drifted by {drift:.3g} over the last 10% of the run")
    return complex(tail[-1])


FIELD_COLUMNS = ["t_us", "re_a1", "im_a1", "re_a2", "im_a2", "re_b", "im_b",
                 "flux_left", "flux_right", "flux_b", "g1_t", "g2_t"]


def write_record_csv(path, fields: FieldRecord, flux: FluxRecord, stride: int = 1) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_COLUMNS)
        for k in range(0, len(fields.times), stride):
            row = [fields.times[k] * 1e6,
                   fields.a1[k].real, fields.a1[k].imag, fields.a2[k].real, fields.a2[k].imag,
                   fields.b[k].real, fields.b[k].imag,
                   flux.left[k], flux.right[k], flux.b[k], flux.g1[k], flux.g2[k]]
            w.writerow([f"{v:.17g}" for v in row])
    return path
