import numpy as np
import pytest

from chiralsim.config import load_config
from chiralsim.errors import ConfigError
from chiralsim.model import CouplerParams, mhz


def test_defaults_are_measured_device():
    cfg = load_config()
    t1 = CouplerParams.measured_device()
    assert cfg.coupler.a1.external_coupling == pytest.approx(t1.a1.external_coupling, rel=1e-12)
    assert cfg.coupler.cancellation_coupling == pytest.approx(t1.cancellation_coupling, rel=1e-12)
    assert cfg.pumps.delta_phi == pytest.approx(-np.pi / 2)


def test_toml_file_and_units(tmp_path):
    f = tmp_path / "dev.toml"
    f.write_text("""
[mode.a1]
freq_ghz = 5.0
kappa_ext_mhz = 1.0
kappa_int_khz = 100.0
[coupler]
g_c_mhz = -0.9
[pumps]
g1_mhz = 0.5
phi2_deg = -90
""")
    cfg = load_config(f, environ={})
    assert cfg.coupler.a1.frequency == pytest.approx(2 * np.pi * 5e9)
    assert cfg.coupler.a1.internal_damping == pytest.approx(2 * np.pi * 1e5)
    assert cfg.coupler.cancellation_coupling == pytest.approx(mhz(-0.9))
    assert cfg.pumps.phi2 == pytest.approx(-np.pi / 2)


def test_ratio_overrides_gc(tmp_path):
    f = tmp_path / "dev.toml"
    f.write_text("[coupler]\ng_c_mhz = -0.9\nratio = 0.5\n")
    cfg = load_config(f, environ={})
    assert cfg.coupler.cancellation_ratio == pytest.approx(0.5)


def test_env_override():
    cfg = load_config(environ={"CHIRALSIM_PUMPS_G1_MHZ": "0.25",
                               "CHIRALSIM_MODE_B_KAPPA_EXT_MHZ": "3.0"})
    assert cfg.pumps.g1 == pytest.approx(mhz(0.25))
    assert cfg.coupler.b.external_coupling == pytest.approx(mhz(3.0))


def test_missing_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[pumps\n")
    with pytest.raises(ConfigError):
        load_config(bad)
