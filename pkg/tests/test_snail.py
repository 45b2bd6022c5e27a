import numpy as np
import pytest
from numpy.polynomial import Chebyshev
from hypothesis import given, settings, strategies as st

from chiralsim.errors import DomainError
from chiralsim.snail import (SnailParams, _u0, c2_slope, coefficient_table, damping_scale,
                             expansion_coefficients, kerr_free_flux, potential_minimum,
                             write_table_csv)



@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.32), st.floats(0.1, 3.0))
def test_taylor_vs_finite_differences(a, f):
    """Derivatives of a Chebyshev interpolant of U serve as the numerical oracle."""
    e = expansion_coefficients(SnailParams(1.0, 1.0, a, f))
    x = 0.5 * np.cos(np.pi * (np.arange(200) + 0.5) / 200)
    cheb = Chebyshev.fit(x, _u0(e.phi_min + x, a, f), 40, domain=[-0.5, 0.5])
    u2, u3, u4 = (cheb.deriv(k)(0.0) for k in (2, 3, 4))
    assert abs(e.c2 - u2) < 1e-8 and abs(e.c3 - u3 / 3) < 1e-8 and abs(e.c4 - u4 / 12) < 1e-8


def test_minimum_against_dense_scan():
    p = SnailParams(1.0, 1.0, 0.29, 2.0)
    grid = np.linspace(-3 * np.pi, 3 * np.pi + 4, 2_000_001)
    ref = grid[np.argmin(_u0(grid, 0.29, 2.0))]
    assert potential_minimum(p) == pytest.approx(ref, abs=1e-5)


@pytest.mark.parametrize("alpha,flux", [(0.1, 2.2277), (0.29, 2.5693)])
def test_kerr_free_flux(alpha, flux):
    f = kerr_free_flux(alpha)
    assert f == pytest.approx(flux, abs=1e-4)
    assert abs(expansion_coefficients(SnailParams(1.0, 1.0, alpha, f)).c4) < 1e-12


def test_flux_sensitivity_chain_rule():
    p = SnailParams(0.2, 50.0, 0.2, 1.7)
    h = 1e-6
    up = expansion_coefficients(SnailParams(0.2, 50.0, 0.2, 1.7 + h)).omega_S
    dn = expansion_coefficients(SnailParams(0.2, 50.0, 0.2, 1.7 - h)).omega_S
    assert expansion_coefficients(p).flux_sensitivity == pytest.approx((up - dn) / (2 * h), rel=1e-7)


def test_damping_scale_ratio():
    r = damping_scale(0.1) / damping_scale(0.29)
    assert r == pytest.approx(1 / 3, abs=0.1)
    assert damping_scale(0.29) == 1.0


def test_kerr_free_slope_monotone_in_alpha():
    alphas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.29]
    slopes = [abs(c2_slope(SnailParams(1, 1, a, kerr_free_flux(a)))) for a in alphas]
    assert np.all(np.diff(slopes) > 0)


def test_invalid_params():
    with pytest.raises(DomainError):
        SnailParams(1.0, 1.0, 1.5)
    with pytest.raises(DomainError):
        SnailParams(0.0, 1.0, 0.2)
    with pytest.raises(DomainError):
        kerr_free_flux(0.6)


def test_table_csv(tmp_path):
    t = coefficient_table(0.1, 100.0, 0.29, np.linspace(0, np.pi, 5))
    path = write_table_csv(tmp_path / "s.csv", t)
    assert path.read_text().splitlines()[0] == "phi_ext,phi_min,c2,c3,c4,omega_s,domega_dphi"
    assert t.shape == (5, 7)
