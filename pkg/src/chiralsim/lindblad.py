"""Master-equation simulation of one or two chiral couplers on a shared line.

Modes are ordered ``(a1, a2, b)`` per coupler.  The waveguide is traced
out: a-modes at positions ``x_j`` (in wavelengths) acquire cross
dissipators ``2 sqrt(gj gk) cos(2 pi |xj - xk|)`` and coherent exchange
``sqrt(gj gk) sin(2 pi |xj - xk|)``.

Every Hamiltonian term conserves total excitation number and every jump
operator lowers it, so a Fock space can optionally be restricted to
states with at most ``max_excitations`` quanta.  For an initial state
inside that subspace the restriction is exact.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import eval_genlaguerre, gammaln

from .errors import DomainError, IntegrationQualityError
from .model import CouplerParams, NetworkLayout, WavepacketSpec
from .timedomain import (STEPS_PER_RATE, DriveEnvelope, TimeGrid, emission_tail_time)

DEFAULT_CAP = 4096


class FockSpace:
    """Truncated product of harmonic-oscillator spaces."""

    def __init__(self, mode_dims: Sequence[int], max_excitations: Optional[int] = None,
                 cap: int = DEFAULT_CAP):
        dims = tuple(int(d) for d in mode_dims)
        if any(d < 2 for d in dims):
            raise DomainError("each mode needs dimension >= 2")
        if int(np.prod(dims)) > cap:
            raise DomainError(f"total dimension {int(np.prod(dims))} exceeds cap {cap}")
        self.mode_dims = dims
        self.max_excitations = max_excitations
        states = itertools.product(*(range(d) for d in dims))
        if max_excitations is not None:
            states = (s for s in states if sum(s) <= max_excitations)
        self.basis: List[Tuple[int, ...]] = sorted(states, key=lambda s: (sum(s), s[::-1]))
        self.index = {s: i for i, s in enumerate(self.basis)}
        self._ops = {}

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def lowering(self, k: int) -> sp.csr_matrix:
        """Annihilation operator of mode ``k`` on this basis."""
        if k not in self._ops:
            rows, cols, vals = [], [], []
            for j, s in enumerate(self.basis):
                if s[k] > 0:
                    t = s[:k] + (s[k] - 1,) + s[k + 1:]
                    i = self.index.get(t)
                    if i is not None:
                        rows.append(i)
                        cols.append(j)
                        vals.append(np.sqrt(s[k]))
            self._ops[k] = sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex)
        return self._ops[k]

    def number(self, k: int) -> np.ndarray:
        return np.array([s[k] for s in self.basis], dtype=float)

    def product_state(self, kets: dict) -> np.ndarray:
        """State vector for a product of single-mode kets (others in vacuum).

        Components outside a restricted basis are dropped and the result
        renormalized.
        """
        singles = []
        for k, d in enumerate(self.mode_dims):
            v = np.zeros(d, dtype=complex)
            if k in kets:
                ket = np.asarray(kets[k], dtype=complex)
                if len(ket) > d:
                    raise DomainError(f"ket for mode {k} exceeds its dimension {d}")
                v[:len(ket)] = ket
            else:
                v[0] = 1.0
            singles.append(v)
        psi = np.array([np.prod([singles[k][n] for k, n in enumerate(s)]) for s in self.basis])
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise DomainError("state has no weight in this Fock space")
        return psi / norm

    def reduce(self, rho: np.ndarray, k: int) -> np.ndarray:
        """Partial trace onto mode ``k``."""
        d = self.mode_dims[k]
        out = np.zeros((d, d), dtype=complex)
        groups = {}
        for i, s in enumerate(self.basis):
            groups.setdefault(s[:k] + s[k + 1:], []).append((s[k], i))
        for members in groups.values():
            for n, i in members:
                for m, j in members:
                    out[n, m] += rho[i, j]
        return out


@dataclass
class DensityMatrix:
    data: np.ndarray
    space: Optional[FockSpace] = None
    time: float = 0.0

    @classmethod
    def from_ket(cls, psi, space=None, time=0.0) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), space, time)

    def check(self, herm_tol=1e-10, trace_tol=1e-8, neg_tol=1e-8) -> None:
        r = self.data
        if np.max(np.abs(r - r.conj().T)) > herm_tol:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(r).real - 1) > trace_tol:
            raise DomainError("density matrix trace differs from 1")
        if np.linalg.eigvalsh((r + r.conj().T) / 2).min() < -neg_tol:
            raise DomainError("density matrix has a negative eigenvalue")

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.conj().T, self.data)))

    def fidelity(self, psi) -> float:
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(psi.conj() @ self.data @ psi))


class Generator:
    """Time-dependent Lindblad generator.

    ``drive_terms`` holds ``(g, O)`` pairs adding ``g(t) * O`` to the
    Hamiltonian.  ``dissipators`` lists ``(rate, j, k)`` entries meaning
    ``rate * D(a_j, a_k)`` with ``D(x, y) rho = x rho y^+ - {y^+ x, rho}/2``.
    """

    def __init__(self, space: FockSpace, H0, drive_terms=(), dissipators=(),
                 psd_tol: float = 1e-12):
        self.space = space
        self.H0 = sp.csr_matrix(H0, dtype=complex)
        self.drive_terms = [(g, sp.csr_matrix(O, dtype=complex)) for g, O in drive_terms]
        self.dissipators = list(dissipators)
        n = space.n_modes
        C = np.zeros((n, n), dtype=complex)
        for rate, j, k in self.dissipators:
            C[j, k] += rate
        self.coefficients = C
        if np.max(np.abs(C - C.conj().T)) > 1e-12 * max(1.0, np.abs(C).max()):
            raise DomainError("dissipator coefficient matrix is not Hermitian")
        w, V = np.linalg.eigh(C)
        scale = max(1.0, float(np.abs(w).max()) if len(w) else 1.0)
        if len(w) and w.min() < -psd_tol * scale:
            raise DomainError(f"dissipator matrix not positive semidefinite (eigenvalue {w.min():.3g})")
        ops = [space.lowering(k) for k in range(n)]
        self.jumps = []
        for m, wm in enumerate(w):
            if wm > psd_tol * scale:
                L = sum(np.sqrt(wm) * V[k, m] * ops[k] for k in range(n) if V[k, m] != 0)
                self.jumps.append(sp.csr_matrix(L))
        dim = space.dim
        self._LdL = sp.csr_matrix((dim, dim), dtype=complex)
        for L in self.jumps:
            self._LdL = self._LdL + (L.conj().T @ L)
        self._dense = dim <= 256
        if self._dense:
            self._H0d = self.H0.toarray()
            self._Od = [O.toarray() for _, O in self.drive_terms]
            self._Ld = [L.toarray() for L in self.jumps]
            self._LdLd = self._LdL.toarray()

    def hamiltonian(self, t: float):
        H = self.H0.copy()
        for g, O in self.drive_terms:
            H = H + float(g(t)) * O
        return H

    def max_rate(self, times) -> float:
        rates = [float(np.abs(np.linalg.eigvalsh(self.coefficients)).max()) if self.space.n_modes else 0.0]
        if self.H0.nnz:
            rates.append(float(np.abs(self.H0.data).max()))
        for g, O in self.drive_terms:
            peak = float(np.max(np.abs(g(np.asarray(times)))))
            rates.append(peak * (float(np.abs(O.data).max()) if O.nnz else 0.0))
        return max(rates)

    def apply(self, t: float, rho: np.ndarray, gvals=None) -> np.ndarray:
        """``d rho / dt``; ``gvals`` optionally supplies the drive values at ``t``."""
        if gvals is None:
            gvals = [float(g(t)) for g, _ in self.drive_terms]
        if self._dense:
            H = self._H0d.copy()
            for gv, O in zip(gvals, self._Od):
                H += gv * O
            He = H - 0.5j * self._LdLd
            x = He @ rho
            out = -1j * x + 1j * x.conj().T  # rho Hermitian => (He rho)^+ = rho He^+
            for L in self._Ld:
                out += L @ rho @ L.conj().T
            return out
        H = self.H0.copy()
        for gv, (_, O) in zip(gvals, self.drive_terms):
            H = H + gv * O
        He = H - 0.5j * self._LdL
        x = He @ rho
        out = -1j * x + 1j * x.conj().T
        for L in self.jumps:
            y = L @ rho
            out += (L @ y.conj().T).conj().T
        return out

    def apply_general(self, t: float, rho: np.ndarray) -> np.ndarray:
        """``L(rho)`` without assuming Hermitian input."""
        He = self.hamiltonian(t).toarray() - 0.5j * self._LdL.toarray()
        out = -1j * (He @ rho - rho @ He.conj().T)
        for L in self.jumps:
            Ld = L.toarray()
            out += Ld @ rho @ Ld.conj().T
        return out


def _hop(space, j, k):
    aj, ak = space.lowering(j), space.lowering(k)
    return aj.conj().T @ ak + ak.conj().T @ aj


def _pump_op(space, a, b, phase, leak_a=None, leakage=0.0):
    """``e^{i phase} (a^+ + eps a'^+) b + h.c.``"""
    ad = space.lowering(a).conj().T
    if leak_a is not None and leakage:
        ad = ad + leakage * space.lowering(leak_a).conj().T
    T = np.exp(1j * phase) * (ad @ space.lowering(b))
    return T + T.conj().T


def _waveguide_terms(space, amodes, gammas, positions):
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    diss = []
    for (j, yj, xj), (k, yk, xk) in itertools.product(zip(amodes, gammas, positions), repeat=2):
        ph = 2 * np.pi * abs(xj - xk)
        if j == k:
            diss.append((2 * yj, j, j))
            continue
        c = np.cos(ph)
        # exact zeros at quarter- and half-wave spacings
        if abs(c) < 1e-14:
            c = 0.0
        if c != 0.0:
            diss.append((2 * np.sqrt(yj * yk) * c, j, k))
        if j < k:
            s = np.sin(ph)
            if abs(s) < 1e-14:
                s = 0.0
            if s != 0.0:
                H = H + np.sqrt(yj * yk) * s * _hop(space, j, k)
    return H, diss


def _coupler_local(space, offset, params: CouplerParams, drive: Optional[DriveEnvelope]):
    a1, a2, b = offset, offset + 1, offset + 2
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    if params.cancellation_coupling:
        H = H + params.cancellation_coupling * _hop(space, a1, a2)
    diss = []
    if params.b.external_coupling:
        diss.append((params.b.external_coupling, b, b))
    for m, rate in ((a1, params.a1.internal_damping), (a2, params.a2.internal_damping),
                    (b, params.b.internal_damping)):
        if rate:
            diss.append((rate, m, m))
    terms = []
    if drive is not None:
        eps = drive.leakage
        terms.append((drive.g1, _pump_op(space, a1, b, drive.phi1, a2, eps)))
        terms.append((drive.g2, _pump_op(space, a2, b, drive.phi2, a1, eps)))
    return H, diss, terms


def _default_space(n_modes, mode_dims, max_excitations, cap):
    if mode_dims is None:
        mode_dims = (3,) * n_modes
    elif np.isscalar(mode_dims):
        mode_dims = (int(mode_dims),) * n_modes
    return FockSpace(mode_dims, max_excitations, cap)


def build_single_coupler_generator(params: CouplerParams, drive: Optional[DriveEnvelope] = None,
                                   mode_dims=None, max_excitations=None,
                                   cap: int = DEFAULT_CAP) -> Generator:
    """Generator for one coupler; modes ``(a1, a2, b)``."""
    space = _default_space(3, mode_dims, max_excitations, cap)
    x2 = params.path_delay_phase / (2 * np.pi)
    Hw, dw = _waveguide_terms(space, (0, 1), (params.a1.external_coupling, params.a2.external_coupling),
                              (0.0, x2))
    Hl, dl, terms = _coupler_local(space, 0, params, drive)
    return Generator(space, Hw + Hl, terms, dw + dl)


def build_two_coupler_generator(layout: NetworkLayout, drives: Optional[Sequence[DriveEnvelope]] = None,
                                mode_dims=None, max_excitations=None,
                                cap: int = DEFAULT_CAP) -> Generator:
    """Generator for two couplers; modes ``(a1, a2, b1, a3, a4, b2)``.

    Without ``drives`` the constant pumps of the layout are used.
    """
    if len(layout.couplers) != 2:
        raise DomainError("layout must contain exactly two couplers")
    if drives is None:
        drives = [DriveEnvelope.constant(p) for p in layout.pumps]
    space = _default_space(6, mode_dims, max_excitations, cap)
    gammas = []
    for cp in layout.couplers:
        gammas += [cp.a1.external_coupling, cp.a2.external_coupling]
    Hw, diss = _waveguide_terms(space, (0, 1, 3, 4), gammas, layout.positions)
    terms = []
    H = Hw
    for k, (cp, drv) in enumerate(zip(layout.couplers, drives)):
        Hl, dl, tl = _coupler_local(space, 3 * k, cp, drv)
        H = H + Hl
        diss += dl
        terms += tl
    return Generator(space, H, terms, diss)


def output_operators(space: FockSpace, amodes, gammas, positions):
    """Right- and left-going output field operators built from the a modes."""
    right = sum(np.sqrt(y) * np.exp(-2j * np.pi * x) * space.lowering(j)
                for j, y, x in zip(amodes, gammas, positions))
    left = sum(np.sqrt(y) * np.exp(2j * np.pi * x) * space.lowering(j)
               for j, y, x in zip(amodes, gammas, positions))
    return sp.csr_matrix(right), sp.csr_matrix(left)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    final: DensityMatrix
    trace_drift: float
    min_eigenvalue: float
    top_level_population: float
    flagged: bool
    observables: dict = field(default_factory=dict)


def _top_level_population(space: FockSpace, rho: np.ndarray) -> float:
    diag = np.real(np.diag(rho))
    worst = 0.0
    for k, d in enumerate(space.mode_dims):
        worst = max(worst, float(diag[space.number(k) == d - 1].sum()))
    return worst


def propagate(rho0: DensityMatrix, gen: Generator, grid: TimeGrid, check_every: int = 100,
              store_every: Optional[int] = None, observables: Optional[dict] = None,
              trace_tol: float = 1e-6, neg_tol: float = 1e-6,
              truncation_tol: float = 1e-4) -> Trajectory:
    """Fixed-step RK4 integration of the master equation.

    ``observables`` maps names to operators whose expectation values are
    recorded at every step.  The trace is never renormalized.
    """
    rho0.check()
    times = grid.times
    grid.check(gen.max_rate(times))
    dt = grid.dt
    rho = np.array(rho0.data, dtype=complex)
    obs = {name: (sp.csr_matrix(op) if sp.issparse(op) else op) for name, op in (observables or {}).items()}
    records = {name: np.empty(len(times), dtype=complex) for name in obs}

    def measure(k, r):
        for name, op in obs.items():
            records[name][k] = np.sum((op @ r).diagonal()) if sp.issparse(op) else np.trace(op @ r)

    states, stored_t = [], []
    worst_drift, worst_eig, worst_top = 0.0, 0.0, 0.0
    gfull = [np.asarray(g(times), dtype=float) * np.ones(len(times)) for g, _ in gen.drive_terms]
    ghalf = [np.asarray(g(times[:-1] + dt / 2), dtype=float) * np.ones(len(times) - 1)
             for g, _ in gen.drive_terms]
    measure(0, rho)
    for k in range(len(times) - 1):
        t = times[k]
        gh = [v[k] for v in ghalf]
        k1 = gen.apply(t, rho, [v[k] for v in gfull])
        k2 = gen.apply(t + dt / 2, rho + dt / 2 * k1, gh)
        k3 = gen.apply(t + dt / 2, rho + dt / 2 * k2, gh)
        k4 = gen.apply(t + dt, rho + dt * k3, [v[k + 1] for v in gfull])
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        measure(k + 1, rho)
        if store_every and (k + 1) % store_every == 0:
            states.append(rho.copy())
            stored_t.append(times[k + 1])
        if (k + 1) % check_every == 0 or k == len(times) - 2:
            rho = (rho + rho.conj().T) / 2
            drift = abs(np.trace(rho).real - 1)
            eig = float(np.linalg.eigvalsh(rho).min())
            worst_drift = max(worst_drift, drift)
            worst_eig = min(worst_eig, eig)
            worst_top = max(worst_top, _top_level_population(gen.space, rho))
            if drift > trace_tol:
                raise IntegrationQualityError(f"trace drift {drift:.3g} at t = {times[k + 1]:.6g}")
            if eig < -neg_tol:
                raise IntegrationQualityError(f"negative eigenvalue {eig:.3g} at t = {times[k + 1]:.6g}")
    final = DensityMatrix(rho, gen.space, float(times[-1]))
    return Trajectory(np.array(stored_t), states, final, worst_drift, worst_eig, worst_top,
                      worst_top >= truncation_tol, records)


@dataclass(frozen=True)
class TransferResult:
    fidelity: float
    purity: float
    residual_source_population: float
    trace_drift: float
    received: np.ndarray
    target: np.ndarray


def state_ket(initial, dim: int = 3) -> np.ndarray:
    """Ket for a named state (``"plus"``, ``"one"``, ``"zero"``) or an explicit vector."""
    named = {"plus": [1, 1], "minus": [1, -1], "one": [0, 1], "zero": [1], "i": [1, 1j]}
    if isinstance(initial, str):
        if initial not in named:
            raise DomainError(f"unknown state {initial!r}")
        v = np.asarray(named[initial], dtype=complex)
    else:
        v = np.asarray(initial, dtype=complex)
    if len(v) > dim:
        raise DomainError(f"state needs {len(v)} Fock levels but the mode has {dim}")
    v = np.concatenate([v, np.zeros(dim - len(v))])
    return v / np.linalg.norm(v)


def transfer_experiment(initial, spec: WavepacketSpec, layout: NetworkLayout, mode_dim: int = 3,
                        residual: float = 1e-4, steps_per_rate: float = STEPS_PER_RATE,
                        restrict: bool = True) -> TransferResult:
    """Emit the state of ``b1`` with coupler 1 and catch it in ``b2`` with coupler 2.

    Coupler 1 runs the emission envelope and coupler 2 its time reverse,
    both with the phases stored in the layout's pump settings.
    """
    ket = state_ket(initial, mode_dim)
    n_max = int(np.max(np.nonzero(np.abs(ket) > 0)[0]))
    c1, c2 = layout.couplers
    p1, p2 = layout.pumps
    d1 = DriveEnvelope.emission(c1.geometric_rate, spec, p1.phi1, p1.phi2)
    d2 = DriveEnvelope.emission(c2.geometric_rate, spec, p2.phi1, p2.phi2, absorb=True)
    d1 = DriveEnvelope(d1.g1, d1.g2, d1.phi1, d1.phi2, p1.leakage)
    d2 = DriveEnvelope(d2.g1, d2.g2, d2.phi1, d2.phi2, p2.leakage)
    gen = build_two_coupler_generator(layout, (d1, d2), (mode_dim,) * 6,
                                      n_max if restrict else None)
    space = gen.space
    psi = space.product_state({2: ket})
    t0 = -8.0 / spec.gamma_ph
    t1 = emission_tail_time(spec, residual) + 8.0 / min(c1.geometric_rate, c2.geometric_rate)
    grid = TimeGrid.for_rate(t0, t1, gen.max_rate(np.linspace(t0, t1, 2001)), steps_per_rate)
    traj = propagate(DensityMatrix.from_ket(psi, space, t0), gen, grid, check_every=200)
    rho = traj.final.data
    received = space.reduce(rho, 5)
    src = float(np.real(np.diag(rho)) @ space.number(2))
    fid = float(np.real(ket.conj() @ received @ ket))
    purity = float(np.real(np.trace(received @ received)))
    return TransferResult(fid, purity, src, traj.trace_drift, received, ket)


@dataclass
class WignerMap:
    x: np.ndarray
    p: np.ndarray
    W: np.ndarray

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.W, self.p, axis=0), self.x))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "p", "W"])
            for i, pv in enumerate(self.p):
                for j, xv in enumerate(self.x):
                    w.writerow([f"{xv:.17g}", f"{pv:.17g}", f"{self.W[i, j]:.17g}"])
        return path


def _displacement_elements(beta, n, m):
    """``<n|D(beta)|m>`` for an array of ``beta``."""
    if n >= m:
        pref = np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
        return pref * beta ** (n - m) * np.exp(-np.abs(beta) ** 2 / 2) * eval_genlaguerre(m, n - m, np.abs(beta) ** 2)
    pref = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
    return pref * (-np.conj(beta)) ** (m - n) * np.exp(-np.abs(beta) ** 2 / 2) * eval_genlaguerre(n, m - n, np.abs(beta) ** 2)


def wigner(rho, xvec, pvec, imag_tol: float = 1e-10) -> WignerMap:
    """Wigner function with ``alpha = (x + i p)/sqrt(2)``, normalized over ``dx dp``."""
    r = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    xvec, pvec = np.asarray(xvec, dtype=float), np.asarray(pvec, dtype=float)
    X, P = np.meshgrid(xvec, pvec)
    beta = 2 * (X + 1j * P) / np.sqrt(2)
    W = np.zeros(X.shape, dtype=complex)
    d = r.shape[0]
    for n in range(d):
        for m in range(d):
            if r[m, n] != 0:
                W += r[m, n] * (-1) ** m * _displacement_elements(beta, n, m)
    W /= np.pi
    if np.max(np.abs(W.imag)) > imag_tol:
        raise DomainError("Wigner function has a significant imaginary part; is rho Hermitian?")
    return WignerMap(xvec, pvec, W.real)
