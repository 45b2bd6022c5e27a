"""Parameter sweeps producing the prediction tables.

Every sweep evaluates a module-level point function over the Cartesian
product of its axes.  Points run serially or on a process pool; rows are
always returned in grid order.  A point that raises a package error is
recorded with a failure code and NaN metrics instead of aborting.
"""
from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from . import __version__
from .config import config_hash
from .errors import (ConvergenceError, DomainError, GridError, IntegrationQualityError,
                     SingularSystemError)
from .freqdomain import default_grid, isolation_metrics, optimize_pump_amplitude
from .lindblad import transfer_experiment
from .model import CouplerParams, NetworkLayout, PumpSettings, WavepacketSpec, mhz, to_mhz
from .snail import FluxNoiseModel, damping_scale
from .timedomain import emission_metrics, emission_run

FAILURE_CODES = [
    (IntegrationQualityError, "integration_quality"),
    (SingularSystemError, "singular_system"),
    (ConvergenceError, "no_convergence"),
    (GridError, "grid"),
    (DomainError, "domain"),
]


@dataclass(frozen=True)
class SweepSpec:
    """Named axes (evaluated as a Cartesian product) plus fixed settings."""

    name: str
    axes: Dict[str, Sequence[float]]
    metrics: Sequence[str]
    base: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not self.axes:
            raise DomainError("a sweep needs at least one axis")
        for k, v in self.axes.items():
            if len(v) < 2:
                raise DomainError(f"axis {k!r} needs at least two points")

    def points(self):
        names = list(self.axes)
        for combo in itertools.product(*(self.axes[n] for n in names)):
            yield dict(zip(names, (float(c) for c in combo)))

    def as_dict(self) -> dict:
        return {"name": self.name, "axes": {k: [float(x) for x in v] for k, v in self.axes.items()},
                "metrics": list(self.metrics), "base": self.base, "seed": self.seed}


@dataclass
class SweepResult:
    columns: list
    rows: list
    metadata: dict

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def write(self, path) -> Path:
        """CSV table plus ``<name>.meta.json`` next to it."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])
        meta = path.with_suffix(".meta.json")
        meta.write_text(json.dumps(self.metadata, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _fmt(v):
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _failure_code(exc: Exception) -> Optional[str]:
    for cls, code in FAILURE_CODES:
        if isinstance(exc, cls):
            return code
    return None


def _evaluate(fn: Callable, spec: SweepSpec, point: dict):
    try:
        return "ok", fn(spec, point)
    except Exception as exc:  # noqa: BLE001 - classified below
        code = _failure_code(exc)
        if code is None:
            raise
        return code, {}


def run_sweep(spec: SweepSpec, fn: Callable, units: Optional[dict] = None,
              workers: int = 1) -> SweepResult:
    """Evaluate ``fn(spec, point) -> dict`` on every grid point.

    ``fn`` must return the resolved parameters and metrics as a flat dict;
    its keys (in first-success order) become the CSV columns after the
    axis values.
    """
    points = list(spec.points())
    task = partial(_evaluate, fn, spec)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(task, points))
    else:
        outcomes = [task(p) for p in points]
    extra = []
    for status, values in outcomes:
        for k in values:
            if k not in extra and k not in spec.axes:
                extra.append(k)
    columns = ["index"] + list(spec.axes) + extra + ["status"]
    rows = []
    for i, (p, (status, values)) in enumerate(zip(points, outcomes)):
        rows.append([i] + [p[a] for a in spec.axes]
                    + [values.get(k, float("nan")) for k in extra] + [status])
    meta = {"sweep": spec.name, "config_hash": config_hash(spec.as_dict()),
            "code_version": __version__, "axes": spec.as_dict()["axes"],
            "base": spec.base, "units": units or {}, "n_rows": len(rows)}
    return SweepResult(columns, rows, meta)


# ---------------------------------------------------------------- point functions

def _coupler_columns(cp: CouplerParams) -> dict:
    return {
        "gamma1_mhz": to_mhz(cp.a1.external_coupling), "gamma2_mhz": to_mhz(cp.a2.external_coupling),
        "gamma_b_mhz": to_mhz(cp.b.external_coupling),
        "gamma_i1_mhz": to_mhz(cp.a1.internal_damping), "gamma_i2_mhz": to_mhz(cp.a2.internal_damping),
        "gamma_ib_mhz": to_mhz(cp.b.internal_damping), "g_c_mhz": to_mhz(cp.cancellation_coupling),
    }


def _isolation_columns(cp: CouplerParams, g: float, leakage: float, optimize_g: bool) -> dict:
    grid = default_grid(max(cp.a1.external_coupling, cp.a2.external_coupling), span=6.0, n=601)
    pumps = PumpSettings.isolate(g, leakage=leakage)
    m = isolation_metrics(cp, pumps, grid)
    out = dict(_coupler_columns(cp))
    out.update({"g_mhz": to_mhz(g), "leakage": leakage,
                "insertion_loss_db": m.insertion_loss_db, "isolation_db": m.isolation_db,
                "isolation_bandwidth_mhz": to_mhz(m.isolation_bandwidth)})
    if optimize_g:
        g_opt, mo = optimize_pump_amplitude(cp, pumps, grid)
        out.update({"g_opt_mhz": to_mhz(g_opt), "insertion_loss_opt_db": mo.insertion_loss_db,
                    "isolation_opt_db": mo.isolation_db})
    return out


def matched_base(gamma_mhz: float = 0.5, gamma_b_mhz: float = 0.5) -> CouplerParams:
    return CouplerParams.symmetric(mhz(gamma_mhz), mhz(gamma_b_mhz))


def _damping_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    gamma = mhz(b["gamma_mhz"])
    cp = matched_base(b["gamma_mhz"], b["gamma_b_mhz"])
    gi = point["gamma_i_ratio"] * gamma
    cp = cp.with_internal(gi, gi if b.get("damp_b", True) else 0.0)
    return _isolation_columns(cp, mhz(b["g_mhz"]), 0.0, b.get("optimize_g", False))


def sweep_isolation_vs_damping(ratios=(0.0, 0.01, 0.1, 0.2), optimize_g: bool = False,
                               gamma_mhz: float = 0.5, gamma_b_mhz: float = 0.5,
                               g_mhz: Optional[float] = None, damp_b: bool = True,
                               workers: int = 1) -> SweepResult:
    """Isolation and insertion loss versus internal damping ``gamma_i / gamma``.

    The default pump is the matched value ``g = gamma / 2`` that gives
    perfect circulation for a lossless device.
    """
    g_mhz = gamma_mhz / 2 if g_mhz is None else g_mhz
    spec = SweepSpec("isolation_vs_damping", {"gamma_i_ratio": list(ratios)},
                     ["insertion_loss_db", "isolation_db"],
                     {"gamma_mhz": gamma_mhz, "gamma_b_mhz": gamma_b_mhz, "g_mhz": g_mhz,
                      "damp_b": damp_b, "optimize_g": optimize_g})
    return run_sweep(spec, _damping_point, {"gamma_i_ratio": "1", "g_mhz": "MHz", "*_db": "dB"}, workers)


def _alpha_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    scale = damping_scale(point["alpha"], FluxNoiseModel(b["reference_alpha"], 1.0))
    t1 = CouplerParams.measured_device()
    cp = replace(t1,
                 a1=replace(t1.a1, internal_damping=t1.a1.internal_damping * scale),
                 a2=replace(t1.a2, internal_damping=t1.a2.internal_damping * scale),
                 b=replace(t1.b, internal_damping=t1.b.internal_damping * scale))
    out = {"damping_scale": scale}
    out.update(_isolation_columns(cp, mhz(b["g_mhz"]), 0.0, b.get("optimize_g", False)))
    return out


def sweep_isolation_vs_alpha(alphas=(0.05, 0.1, 0.15, 0.2, 0.25, 0.29), optimize_g: bool = False,
                             g_mhz: float = 0.70, reference_alpha: float = 0.29,
                             workers: int = 1) -> SweepResult:
    """Measured device with all internal dampings scaled by the SNAIL flux-noise model."""
    spec = SweepSpec("isolation_vs_alpha", {"alpha": list(alphas)},
                     ["insertion_loss_db", "isolation_db"],
                     {"g_mhz": g_mhz, "reference_alpha": reference_alpha, "optimize_g": optimize_g})
    return run_sweep(spec, _alpha_point, {"alpha": "1", "*_db": "dB"}, workers)


def emission_coupler(gamma: float, alpha: float, reference_alpha: float = 0.29) -> CouplerParams:
    """Symmetric emitter with ideal bus mode and SNAIL-scaled internal loss on a1, a2."""
    t1 = CouplerParams.measured_device()
    scale = damping_scale(alpha, FluxNoiseModel(reference_alpha, 1.0))
    cp = CouplerParams.symmetric(gamma, 0.0)
    return replace(cp, a1=replace(cp.a1, internal_damping=t1.a1.internal_damping * scale),
                   a2=replace(cp.a2, internal_damping=t1.a2.internal_damping * scale))


def device_emission_coupler() -> CouplerParams:
    """Measured device (including its cancellation ratio) with an ideal bus mode."""
    t1 = CouplerParams.measured_device()
    return replace(t1, b=replace(t1.b, external_coupling=0.0, internal_damping=0.0))


def _emission_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    gamma = mhz(point["gamma_mhz"])
    cp = emission_coupler(gamma, point["alpha"], b["reference_alpha"])
    _, flux = emission_run(cp, WavepacketSpec(b["gamma_ph_ratio"] * gamma))
    m = emission_metrics(flux)
    out = dict(_coupler_columns(cp))
    out.update({"efficiency": m.efficiency, "right_fraction": m.right_fraction,
                "total_photons": m.total_photons})
    return out


def sweep_emission_efficiency_map(gammas_mhz=(0.5, 1.0, 2.0, 3.5), alphas=(0.1, 0.2, 0.29),
                                  gamma_ph_ratio: float = 0.5, reference_alpha: float = 0.29,
                                  workers: int = 1) -> SweepResult:
    """Rightward emission efficiency over external coupling and SNAIL asymmetry.

    The measured-device point (its own rates, ideal bus mode) is stored
    in the metadata under ``current_device``.
    """
    spec = SweepSpec("emission_efficiency_map",
                     {"gamma_mhz": list(gammas_mhz), "alpha": list(alphas)}, ["efficiency"],
                     {"gamma_ph_ratio": gamma_ph_ratio, "reference_alpha": reference_alpha})
    res = run_sweep(spec, _emission_point, {"gamma_mhz": "MHz", "efficiency": "1"}, workers)
    dev = device_emission_coupler()
    _, flux = emission_run(dev, WavepacketSpec(gamma_ph_ratio * dev.geometric_rate))
    res.metadata["current_device"] = {"gamma_mhz": to_mhz(dev.geometric_rate), "alpha": reference_alpha,
                                      "efficiency": emission_metrics(flux).efficiency}
    return res


def _leakage_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    gamma = mhz(b["gamma_mhz"])
    cp = matched_base(b["gamma_mhz"], b["gamma_b_mhz"]).with_internal(b["gamma_i_ratio"] * gamma,
                                                                      b["gamma_i_ratio"] * gamma)
    return _isolation_columns(cp, mhz(b["g_mhz"]), point["leakage"], b.get("optimize_g", False))


def sweep_pump_leakage(leakages=(0.0, 0.2, 0.5), gamma_mhz: float = 0.5, gamma_b_mhz: float = 0.5,
                       gamma_i_ratio: float = 0.01, g_mhz: Optional[float] = None,
                       optimize_g: bool = False, workers: int = 1) -> SweepResult:
    """Isolation and insertion loss versus pump leakage on the matched device."""
    g_mhz = gamma_mhz / 2 if g_mhz is None else g_mhz
    spec = SweepSpec("pump_leakage", {"leakage": list(leakages)}, ["isolation_db"],
                     {"gamma_mhz": gamma_mhz, "gamma_b_mhz": gamma_b_mhz, "g_mhz": g_mhz,
                      "gamma_i_ratio": gamma_i_ratio, "optimize_g": optimize_g})
    return run_sweep(spec, _leakage_point, {"leakage": "1", "*_db": "dB"}, workers)


def transfer_layout(gamma: float, ratio: float = 1.0, gamma_ia: float = 0.0,
                    spacing: float = 1.0) -> NetworkLayout:
    cp = CouplerParams.symmetric(gamma, 0.0, gamma_ia=gamma_ia, ratio=ratio)
    return NetworkLayout.two_couplers(cp, spacing)


def _residual_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    gamma = mhz(b["gamma_mhz"])
    cp = CouplerParams.symmetric(gamma, 0.0, ratio=point["ratio"])
    wp = WavepacketSpec(b["gamma_ph_ratio"] * gamma)
    _, flux = emission_run(cp, wp)
    m = emission_metrics(flux)
    out = dict(_coupler_columns(cp))
    out.update({"right_fraction": m.right_fraction, "left_fraction": m.left_fraction,
                "efficiency": m.efficiency})
    if b.get("lindblad", False):
        r = transfer_experiment("plus", wp, transfer_layout(gamma, point["ratio"]),
                                mode_dim=b.get("fock_dim", 3))
        out.update({"purity": r.purity, "fidelity": r.fidelity})
    return out


def sweep_residual_coupling(ratios=(0.5, 0.8, 1.0, 1.2, 1.5), lindblad: bool = False,
                            gamma_mhz: float = 5.0, gamma_ph_ratio: float = 0.1,
                            fock_dim: int = 3, workers: int = 1) -> SweepResult:
    """Emission directionality (and optionally transfer purity) versus ``|g_c| / gamma``."""
    ratios = list(ratios)
    if any(not 0 < r <= 2 for r in ratios):
        raise DomainError("ratios must lie in (0, 2]")
    spec = SweepSpec("residual_coupling", {"ratio": ratios}, ["right_fraction"],
                     {"gamma_mhz": gamma_mhz, "gamma_ph_ratio": gamma_ph_ratio,
                      "lindblad": lindblad, "fock_dim": fock_dim})
    return run_sweep(spec, _residual_point, {"ratio": "1"}, workers)


def _fidelity_point(spec: SweepSpec, point: dict) -> dict:
    b = spec.base
    gamma = mhz(b["gamma_mhz"])
    layout = transfer_layout(gamma, 1.0, point["gamma_i_ratio"] * gamma)
    r = transfer_experiment("plus", WavepacketSpec(b["gamma_ph_ratio"] * gamma), layout,
                            mode_dim=b.get("fock_dim", 3))
    out = dict(_coupler_columns(layout.couplers[0]))
    out.update({"fidelity": r.fidelity, "purity": r.purity,
                "residual_source_population": r.residual_source_population,
                "trace_drift": r.trace_drift})
    return out


def sweep_transfer_fidelity_vs_damping(ratios=(0.0, 0.05, 0.1, 0.2), gamma_mhz: float = 5.0,
                                       gamma_ph_ratio: float = 0.1, fock_dim: int = 3,
                                       workers: int = 1) -> SweepResult:
    """State-transfer fidelity of ``(|0> + |1>)/sqrt(2)`` versus a-mode internal damping."""
    spec = SweepSpec("transfer_fidelity_vs_damping", {"gamma_i_ratio": list(ratios)}, ["fidelity"],
                     {"gamma_mhz": gamma_mhz, "gamma_ph_ratio": gamma_ph_ratio, "fock_dim": fock_dim})
    return run_sweep(spec, _fidelity_point, {"gamma_i_ratio": "1"}, workers)


SWEEPS = {
    "damping": sweep_isolation_vs_damping,
    "alpha": sweep_isolation_vs_alpha,
    "emission_map": sweep_emission_efficiency_map,
    "leakage": sweep_pump_leakage,
    "residual": sweep_residual_coupling,
    "fidelity": sweep_transfer_fidelity_vs_damping,
}
