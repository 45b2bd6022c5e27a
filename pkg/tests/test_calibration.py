import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralsim.calibration import (SyntheticNoiseSpec, Trace, cancellation_curve,
                                   fit_cancellation_vs_detuning, fit_pump_linearity, fit_resonance,
                                   fit_s21_cancellation, lorentzian_s21, read_trace_csv, synth_trace,
                                   write_trace_csv)
from chiralsim.errors import DomainError

TRUE = {"g_c": -1.3, "gamma_e": 1.0, "gamma_i1": 0.3, "gamma_i2": 0.3}


def _rel(fit, truth):
    return max(abs(fit[k] - v) / abs(v) for k, v in truth.items())


def test_noiseless_roundtrip_strong_branch():
    tr = synth_trace(TRUE, np.linspace(-5, 5, 401))
    fit = fit_s21_cancellation(tr, branch="strong")
    assert _rel(fit.params, TRUE) < 1e-6
    assert fit.residual_norm < 1e-7


def test_noiseless_roundtrip_weak_branch_with_unequal_losses():
    truth = {"g_c": -0.7, "gamma_e": 1.0, "gamma_i1": 0.2, "gamma_i2": 0.4}
    tr = synth_trace(truth, np.linspace(-5, 5, 401))
    fit = fit_s21_cancellation(tr, branch="weak", internal_ratio=2.0)
    assert _rel(fit.params, truth) < 1e-6


def test_wrong_branch_gives_equivalent_curve():
    # the transmission is identical on the mirrored branch, so only the prior can decide
    tr = synth_trace(TRUE, np.linspace(-5, 5, 401))
    fit = fit_s21_cancellation(tr, branch="weak")
    assert fit.residual_norm < 1e-6
    assert fit.params["g_c"] == pytest.approx(-0.7, abs=1e-5)


def test_noise_is_seeded():
    d = np.linspace(-5, 5, 51)
    a = synth_trace(TRUE, d, SyntheticNoiseSpec(0.01, 3)).s21
    b = synth_trace(TRUE, d, SyntheticNoiseSpec(0.01, 3)).s21
    c = synth_trace(TRUE, d, SyntheticNoiseSpec(0.01, 4)).s21
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(DomainError):
        SyntheticNoiseSpec(-1.0)


def test_fit_argument_validation():
    tr = synth_trace(TRUE, np.linspace(-5, 5, 21))
    with pytest.raises(DomainError):
        fit_s21_cancellation(tr, branch="middle")
    with pytest.raises(DomainError):
        fit_s21_cancellation(tr, internal_ratio=0.0)
    with pytest.raises(DomainError):
        Trace(np.array([0.0, np.nan]), np.array([1.0, 1.0]))


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 3.0))
def test_cancellation_vs_detuning_roundtrip(g12, gb):
    D = np.array([-20.0, -12.0, 8.0, 15.0, 30.0]) * 10
    r = cancellation_curve(D, g12, gb, 1.0)
    if np.any(g12 + gb ** 2 / D <= 0):
        return
    fit = fit_cancellation_vs_detuning(D, r, 1.0)
    assert fit.params["g12"] == pytest.approx(g12, abs=1e-9)
    assert fit.params["g_b"] == pytest.approx(gb, rel=1e-8)


def test_cancellation_vs_detuning_degenerate():
    with pytest.raises(DomainError):
        fit_cancellation_vs_detuning([1.0, 1.0, 1.0], [1, 1, 1], 1.0)
    with pytest.raises(DomainError):
        fit_cancellation_vs_detuning([1.0, 2.0], [1, 1], 1.0)


def test_pump_linearity():
    x = np.linspace(0.1, 1.0, 10)
    fit = fit_pump_linearity(x, 2.5 * x)
    assert fit.slope == pytest.approx(2.5) and fit.intercept_ok
    assert not fit_pump_linearity(x, 2.5 * x + 0.3).intercept_ok
    with pytest.raises(DomainError):
        fit_pump_linearity([1.0, 1.0], [1.0, 2.0])


@pytest.mark.parametrize("kind", ["hanger", "reflection"])
def test_resonance_fit(kind):
    f = np.linspace(-10, 10, 401)
    s = lorentzian_s21(f, 0.3, 1.2, 0.4, kind)
    fit = fit_resonance(f, s, kind)
    assert fit.params["f0"] == pytest.approx(0.3, abs=1e-8)
    assert fit.params["kappa_ext"] == pytest.approx(1.2, rel=1e-7)
    assert fit.params["kappa_int"] == pytest.approx(0.4, rel=1e-7)


def test_trace_csv_roundtrip(tmp_path):
    tr = synth_trace(TRUE, np.linspace(-5, 5, 11) * 2 * np.pi * 1e6)
    path = write_trace_csv(tmp_path / "t.csv", tr, center_mhz=4875.0)
    back = read_trace_csv(path, center_mhz=4875.0)
    assert np.array_equal(back.s21, tr.s21)
    assert np.allclose(back.detuning, tr.detuning, atol=1e-3)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        read_trace_csv(tmp_path / "bad.csv")
