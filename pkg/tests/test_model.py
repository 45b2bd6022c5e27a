import numpy as np
import pytest

from chiralsim.errors import DomainError
from chiralsim.model import (BusCouplingModel, CouplerParams, ModeParams, NetworkLayout,
                             PumpSettings, WavepacketSpec, cancellation_coupling, mhz,
                             target_cancellation, to_mhz, validate_params)


def test_measured_device_ratio_reported_unsigned():
    rep = validate_params(CouplerParams.measured_device(), PumpSettings.isolate(mhz(0.7)))
    assert rep.ok
    assert rep.cancellation_ratio == pytest.approx(1.04, abs=1e-12)
    assert rep.signed_ratio == pytest.approx(-1.04, abs=1e-12)
    assert not rep.ideal_cancellation


def test_ideal_cancellation_flagged():
    p = CouplerParams.symmetric(1.0, 1.0)
    rep = validate_params(p)
    assert rep.ideal_cancellation
    assert rep.cancellation_ratio == 1.0


def test_zero_rates_fail_ratio_checks():
    z = ModeParams(0.0, 0.0)
    rep = validate_params(CouplerParams(z, z, z, 0.0))
    assert "gamma1_positive" in rep.failures
    assert "gamma2_positive" in rep.failures
    assert np.isnan(rep.cancellation_ratio)


def test_negative_damping_rejected():
    bad = ModeParams(1.0, 1.0, -0.1)
    rep = validate_params(CouplerParams(bad, bad, bad, -1.0))
    assert "a1.internal_damping_nonnegative" in rep.failures


def test_cancellation_coupling_bus_model():
    m = BusCouplingModel(mhz(0.1), mhz(30.0), mhz(1395.0))
    assert to_mhz(cancellation_coupling(m)) == pytest.approx(0.1 + 900 / 1395, rel=1e-12)


def test_cancellation_coupling_zero_detuning():
    with pytest.raises(DomainError):
        cancellation_coupling(BusCouplingModel(1.0, 1.0, 0.0))


def test_target_cancellation():
    assert target_cancellation(4.0, 1.0) == -2.0
    with pytest.raises(DomainError):
        target_cancellation(-1.0, 1.0)


def test_pump_presets():
    assert PumpSettings.isolate(1.0).delta_phi == pytest.approx(-np.pi / 2)
    assert PumpSettings.pass_(1.0).delta_phi == pytest.approx(np.pi / 2)


def test_wavepacket_validation():
    with pytest.raises(DomainError):
        WavepacketSpec(0.0)
    with pytest.raises(DomainError):
        WavepacketSpec(1.0, "up")


def test_layout_requires_quarter_wave_pairs():
    cp = CouplerParams.symmetric(1.0, 0.0)
    NetworkLayout.two_couplers(cp, 1.0)
    with pytest.raises(DomainError):
        NetworkLayout((0.0, 0.3, 1.0, 1.25), (cp, cp), (PumpSettings(0, 0),) * 2)
    with pytest.raises(DomainError):
        NetworkLayout((0.0, 0.25, 0.2, 0.45), (cp, cp), (PumpSettings(0, 0),) * 2)
