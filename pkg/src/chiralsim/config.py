"""TOML configuration loading with environment overrides.

File values are cyclic frequencies (``value / 2 pi``) in the unit named by
the key suffix; the loader converts to rad/s.  ``kappa_ext_mhz`` is the
coupling rate ``gamma`` of the input-output relations, so the measured
device uses 0.73 and 0.715 MHz for ``a1`` and ``a2``.

Any key can be overridden by ``CHIRALSIM_<SECTION>_<KEY>`` with dots in the
section name replaced by underscores, e.g. ``CHIRALSIM_MODE_A1_KAPPA_EXT_MHZ``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .model import CouplerParams, ModeParams, PumpSettings, ghz, khz, mhz

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ENV_PREFIX = "CHIRALSIM_"

DEFAULTS = {
    "mode.a1": {"freq_ghz": 4.875, "kappa_ext_mhz": 0.73, "kappa_int_khz": 215.0},
    "mode.a2": {"freq_ghz": 4.875, "kappa_ext_mhz": 0.715, "kappa_int_khz": 294.0},
    "mode.b": {"freq_ghz": 6.270, "kappa_ext_mhz": 2.51, "kappa_int_khz": 588.0},
    "coupler": {"ratio": 1.04},
    "pumps": {"g1_mhz": 0.70, "g2_mhz": 0.70, "phi1_deg": 0.0, "phi2_deg": 90.0, "leakage": 0.0},
    "wavepacket": {"gamma_ph_ratio": 0.5, "direction": "right"},
    "snail": {"alpha": 0.29, "e_j_ghz": 100.0, "e_c_ghz": 0.1},
    "transfer": {"gamma_mhz": 5.0, "gamma_ph_ratio": 0.1, "spacing": 1.0, "state": "plus"},
    "fit": {"branch": "strong", "internal_ratio": 1.0, "center_mhz": 0.0, "n_starts": 6},
    "sweep": {"kind": "damping", "values": [0.0, 0.01, 0.1, 0.2], "alphas": [0.1, 0.2, 0.29],
              "workers": 1},
}


@dataclass(frozen=True)
class RunConfig:
    coupler: CouplerParams
    pumps: PumpSettings
    sections: dict

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def digest(self) -> str:
        return config_hash(self.sections)


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _flatten(data: Mapping, prefix: str = "") -> dict:
    """Nested TOML tables to ``{"mode.a1": {...}, ...}``."""
    out = {}
    for k, v in data.items():
        name = f"{prefix}.{k}" if prefix else k
        if isinstance(v, Mapping):
            leaves = {kk: vv for kk, vv in v.items() if not isinstance(vv, Mapping)}
            if leaves:
                out[name] = dict(leaves)
            out.update(_flatten({kk: vv for kk, vv in v.items() if isinstance(vv, Mapping)}, name))
    return out


def _parse_env(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, (int, float)) and not isinstance(like, bool):
        return type(like)(float(value)) if isinstance(like, int) else float(value)
    if isinstance(like, list):
        return [float(v) for v in value.split(",") if v.strip()]
    try:
        return float(value)
    except ValueError:
        return value


def apply_env(sections: dict, environ: Optional[Mapping] = None) -> dict:
    env = os.environ if environ is None else environ
    out = copy.deepcopy(sections)
    known = {name: set(keys) for name, keys in DEFAULTS.items()}
    for name, keys in out.items():
        known.setdefault(name, set()).update(keys)
    for name, keys in known.items():
        for key in keys:
            var = ENV_PREFIX + f"{name}_{key}".replace(".", "_").upper()
            if var in env:
                like = out.get(name, {}).get(key, DEFAULTS.get(name, {}).get(key))
                out.setdefault(name, {})[key] = _parse_env(env[var], like)
    return out


def load_config(path=None, environ: Optional[Mapping] = None) -> RunConfig:
    """Read a TOML file (or defaults only when ``path`` is None)."""
    sections = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        for name, keys in _flatten(data).items():
            sections.setdefault(name, {}).update(keys)
        # an explicit g_c in the file takes precedence over the default ratio
        if "g_c_mhz" in data.get("coupler", {}) and "ratio" not in data.get("coupler", {}):
            sections["coupler"].pop("ratio", None)
    sections = apply_env(sections, environ)
    return RunConfig(*build_params(sections), sections)


def _mode(sec: dict, name: str) -> ModeParams:
    try:
        return ModeParams(ghz(float(sec["freq_ghz"])), mhz(float(sec["kappa_ext_mhz"])),
                          khz(float(sec.get("kappa_int_khz", 0.0))))
    except KeyError as exc:
        raise ConfigError(f"[{name}] is missing key {exc}") from exc


def build_params(sections: dict):
    a1 = _mode(sections["mode.a1"], "mode.a1")
    a2 = _mode(sections["mode.a2"], "mode.a2")
    b = _mode(sections["mode.b"], "mode.b")
    geo = float(np.sqrt(a1.external_coupling * a2.external_coupling))
    cp = sections.get("coupler", {})
    if "ratio" in cp:
        g_c = -float(cp["ratio"]) * geo
    elif "g_c_mhz" in cp:
        g_c = mhz(float(cp["g_c_mhz"]))
    else:
        g_c = -geo
    for name, m in (("a1", a1), ("a2", a2), ("b", b)):
        if m.external_coupling < 0 or m.internal_damping < 0:
            raise DomainError(f"mode {name}: rates must be non-negative")
    coupler = CouplerParams(a1, a2, b, g_c)
    pp = sections.get("pumps", {})
    pumps = PumpSettings(mhz(float(pp.get("g1_mhz", 0.0))), mhz(float(pp.get("g2_mhz", 0.0))),
                         float(np.deg2rad(float(pp.get("phi1_deg", 0.0)))),
                         float(np.deg2rad(float(pp.get("phi2_deg", 90.0)))),
                         b.frequency - a1.frequency, float(pp.get("leakage", 0.0)))
    if pumps.g1 < 0 or pumps.g2 < 0 or not 0 <= pumps.leakage <= 1:
        raise DomainError("pump amplitudes must be >= 0 and leakage in [0, 1]")
    return coupler, pumps
