"""Parameter containers for the three-mode chiral coupler.

All rates and frequencies are angular (rad/s) unless a helper says
otherwise.  The coupler has two waveguide-coupled modes ``a1`` and ``a2``
separated by a quarter wavelength along the line, and a bus mode ``b``
that is parametrically coupled to both.

The sign convention for the coherent coupling between ``a1`` and ``a2``
is such that the waveguide-mediated exchange ``sqrt(gamma1 * gamma2)``
is cancelled by ``g_c = -sqrt(gamma1 * gamma2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi


def mhz(value: float) -> float:
    """Convert a cyclic frequency in MHz to angular frequency in rad/s."""
    return TWO_PI * value * 1e6


def khz(value: float) -> float:
    return TWO_PI * value * 1e3


def ghz(value: float) -> float:
    return TWO_PI * value * 1e9


def to_mhz(omega: float) -> float:
    """Inverse of :func:`mhz`."""
    return omega / TWO_PI / 1e6


@dataclass(frozen=True)
class ModeParams:
    """One resonator mode.

    Attributes
    ----------
    frequency : float
        Resonance frequency in rad/s.
    external_coupling : float
        Coupling rate to its port, ``gamma`` in rad/s.  For the ``a`` modes
        this is the rate that appears as ``sqrt(gamma)`` in the input-output
        relations, so the energy decay rate into the line is ``2 * gamma``.
    internal_damping : float
        Intrinsic loss rate in rad/s.
    """

    frequency: float
    external_coupling: float
    internal_damping: float = 0.0


@dataclass(frozen=True)
class CouplerParams:
    """The two waveguide modes, the bus mode and their direct coupling."""

    a1: ModeParams
    a2: ModeParams
    b: ModeParams
    cancellation_coupling: float
    path_delay_phase: float = np.pi / 2

    @property
    def geometric_rate(self) -> float:
        """``sqrt(gamma1 * gamma2)``, the waveguide-mediated exchange rate."""
        return float(np.sqrt(self.a1.external_coupling * self.a2.external_coupling))

    @property
    def cancellation_ratio(self) -> float:
        """``|g_c| / sqrt(gamma1 * gamma2)``; equals 1 at perfect cancellation."""
        geo = self.geometric_rate
        if geo == 0:
            return float("nan")
        return abs(self.cancellation_coupling) / geo

    @property
    def residual_coupling(self) -> float:
        """Net coherent a1-a2 exchange after cancellation."""
        return self.geometric_rate + self.cancellation_coupling

    @property
    def rates(self) -> np.ndarray:
        return np.array([
            self.a1.external_coupling, self.a2.external_coupling, self.b.external_coupling,
            self.a1.internal_damping, self.a2.internal_damping, self.b.internal_damping,
        ])

    def with_ratio(self, ratio: float) -> "CouplerParams":
        """Copy with ``g_c = -ratio * sqrt(gamma1 * gamma2)``."""
        return replace(self, cancellation_coupling=-ratio * self.geometric_rate)

    def with_internal(self, gamma_ia: Optional[float] = None,
                      gamma_ib: Optional[float] = None) -> "CouplerParams":
        """Copy with internal damping replaced on the a modes and/or b."""
        a1, a2, b = self.a1, self.a2, self.b
        if gamma_ia is not None:
            a1 = replace(a1, internal_damping=gamma_ia)
            a2 = replace(a2, internal_damping=gamma_ia)
        if gamma_ib is not None:
            b = replace(b, internal_damping=gamma_ib)
        return replace(self, a1=a1, a2=a2, b=b)

    @classmethod
    def symmetric(cls, gamma: float, gamma_b: float, gamma_ia: float = 0.0,
                  gamma_ib: float = 0.0, ratio: float = 1.0,
                  omega_a: float = ghz(4.875), omega_b: float = ghz(6.270)) -> "CouplerParams":
        """Identical a modes with coupling ``gamma`` and ``g_c = -ratio * gamma``."""
        a = ModeParams(omega_a, gamma, gamma_ia)
        b = ModeParams(omega_b, gamma_b, gamma_ib)
        return cls(a, a, b, -ratio * gamma)

    @classmethod
    def measured_device(cls) -> "CouplerParams":
        """Parameters of the measured device."""
        a1 = ModeParams(ghz(4.875), mhz(0.73), khz(215.0))
        a2 = ModeParams(ghz(4.875), mhz(0.715), khz(294.0))
        b = ModeParams(ghz(6.270), mhz(2.51), khz(588.0))
        geo = np.sqrt(a1.external_coupling * a2.external_coupling)
        return cls(a1, a2, b, -1.04 * geo)


@dataclass(frozen=True)
class PumpSettings:
    """Parametric pump amplitudes and phases for the a1-b and a2-b conversions.

    ``leakage`` is the fraction of each pump that also drives the other
    conversion process.
    """

    g1: float
    g2: float
    phi1: float = 0.0
    phi2: float = np.pi / 2
    pump_frequency: Optional[float] = None
    leakage: float = 0.0

    @property
    def delta_phi(self) -> float:
        return self.phi1 - self.phi2

    @classmethod
    def isolate(cls, g: float, phi1: float = 0.0, leakage: float = 0.0) -> "PumpSettings":
        """Pump phases routing port 1 into the bus and blocking port 1 -> 2."""
        return cls(g, g, phi1, phi1 + np.pi / 2, leakage=leakage)

    @classmethod
    def pass_(cls, g: float, phi1: float = 0.0, leakage: float = 0.0) -> "PumpSettings":
        """Pump phases transmitting port 1 -> 2."""
        return cls(g, g, phi1, phi1 - np.pi / 2, leakage=leakage)

    def with_amplitude(self, g: float) -> "PumpSettings":
        return replace(self, g1=g, g2=g)


@dataclass(frozen=True)
class BusCouplingModel:
    """Direct a1-a2 coupling plus the dispersive path through the bus."""

    g12: float
    g_b: float
    detuning: float


@dataclass(frozen=True)
class WavepacketSpec:
    """Hyperbolic-secant single-photon wavepacket.

    ``gamma_ph`` is the bandwidth in rad/s and ``direction`` is
    ``"right"`` or ``"left"``.
    """

    gamma_ph: float
    direction: str = "right"

    def __post_init__(self):
        if self.direction not in ("right", "left"):
            raise DomainError(f"direction must be 'right' or 'left', got {self.direction!r}")
        if not self.gamma_ph > 0:
            raise DomainError("gamma_ph must be positive")


@dataclass(frozen=True)
class NetworkLayout:
    """Couplers placed along a shared transmission line.

    ``positions`` lists the a-mode positions in units of the wavelength, two
    per coupler in order.
    """

    positions: Sequence[float]
    couplers: Sequence[CouplerParams]
    pumps: Sequence[PumpSettings]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if len(pos) != 2 * len(self.couplers) or len(self.couplers) != len(self.pumps):
            raise DomainError("layout needs two positions and one pump setting per coupler")
        if np.any(np.diff(pos) <= 0):
            raise DomainError("positions must be strictly increasing")
        for k, cp in enumerate(self.couplers):
            sep = pos[2 * k + 1] - pos[2 * k]
            if not np.isclose(sep, 0.25, atol=1e-12):
                raise DomainError(f"coupler {k}: a-mode separation {sep} is not a quarter wavelength")
            if not np.isclose(cp.path_delay_phase, np.pi / 2):
                raise DomainError(f"coupler {k}: path delay phase must be pi/2")

    @classmethod
    def two_couplers(cls, coupler: CouplerParams, spacing: float = 1.0,
                     pumps: Optional[Sequence[PumpSettings]] = None) -> "NetworkLayout":
        """Two identical couplers whose first modes are ``spacing`` wavelengths apart."""
        if pumps is None:
            pumps = (PumpSettings.isolate(0.0), PumpSettings.isolate(0.0))
        return cls((0.0, 0.25, spacing, spacing + 0.25), (coupler, coupler), tuple(pumps))


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_params`."""

    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    cancellation_ratio: float = float("nan")
    signed_ratio: float = float("nan")
    delta_phi: Optional[float] = None
    ideal_cancellation: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_params(params: CouplerParams, pumps: Optional[PumpSettings] = None,
                    ideal_tol: float = 1e-9) -> ValidationReport:
    """Check physical invariants and report the cancellation ratio."""
    rep = ValidationReport()

    def check(name, ok):
        rep.checks[name] = bool(ok)
        if not ok:
            rep.failures.append(name)

    for label, mode in (("a1", params.a1), ("a2", params.a2), ("b", params.b)):
        check(f"{label}.external_coupling_nonnegative", mode.external_coupling >= 0)
        check(f"{label}.internal_damping_nonnegative", mode.internal_damping >= 0)
        check(f"{label}.frequency_finite", np.isfinite(mode.frequency))
    # The cancellation ratio is undefined without waveguide coupling.
    check("gamma1_positive", params.a1.external_coupling > 0)
    check("gamma2_positive", params.a2.external_coupling > 0)
    check("cancellation_coupling_finite", np.isfinite(params.cancellation_coupling))

    geo = params.geometric_rate
    if geo > 0:
        rep.signed_ratio = params.cancellation_coupling / geo
        rep.cancellation_ratio = abs(rep.signed_ratio)
        rep.ideal_cancellation = abs(rep.signed_ratio + 1.0) <= ideal_tol

    if pumps is not None:
        check("pump_amplitudes_nonnegative", pumps.g1 >= 0 and pumps.g2 >= 0)
        check("leakage_in_unit_interval", 0.0 <= pumps.leakage <= 1.0)
        rep.delta_phi = float(np.angle(np.exp(1j * pumps.delta_phi)))
    return rep


def cancellation_coupling(model: BusCouplingModel) -> float:
    """Net a1-a2 coupling ``g12 + g_b**2 / Delta``."""
    if model.detuning == 0:
        raise DomainError("bus detuning must be nonzero")
    return model.g12 + model.g_b ** 2 / model.detuning


def target_cancellation(gamma1: float, gamma2: float) -> float:
    """Coupling value that cancels the waveguide exchange."""
    if gamma1 < 0 or gamma2 < 0:
        raise DomainError("coupling rates must be non-negative")
    return -float(np.sqrt(gamma1 * gamma2))
