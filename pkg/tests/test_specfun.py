import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from fhr.errors import DomainError, RangeError
from fhr.specfun import (I_OVERFLOW_GUARD, BesselAccuracy, bessel_i, bessel_j,
                         bessel_j1_ratio, series_oracle)

mp.mp.dps = 40


@pytest.mark.parametrize("order", [0, 1])
@pytest.mark.parametrize("z", [0.0, 1e-8, 0.3, 2.0, 7.99, 8.01, 12.5, 30.0, 49.9, 50.1, 80.0, 300.0])
def test_bessel_j_matches_mpmath(order, z):
    ref = float(mp.besselj(order, z))
    assert abs(float(bessel_j(order, z)) - ref) <= 2e-14


@pytest.mark.parametrize("order", [0, 1])
@pytest.mark.parametrize("z", [0.0, 0.5, 5.0, 29.9, 30.1, 45.0, 120.0, 650.0])
def test_bessel_i_relative_error(order, z):
    ref = float(mp.besseli(order, z))
    got = float(bessel_i(order, z))
    assert abs(got - ref) <= 4e-15 * max(1.0, abs(ref))


def test_parity():
    z = np.linspace(-40, 40, 161)
    np.testing.assert_allclose(bessel_j(0, -z), bessel_j(0, z), rtol=0, atol=0)
    np.testing.assert_allclose(bessel_j(1, -z), -bessel_j(1, z), rtol=0, atol=0)
    np.testing.assert_allclose(bessel_i(0, -z), bessel_i(0, z), rtol=0, atol=0)
    np.testing.assert_allclose(bessel_i(1, -z), -bessel_i(1, z), rtol=0, atol=0)


def test_vectorised_matches_scipy():
    z = np.linspace(-60, 60, 5001)
    np.testing.assert_allclose(bessel_j(0, z), special.j0(z), rtol=0, atol=5e-14)
    np.testing.assert_allclose(bessel_j(1, z), special.j1(z), rtol=0, atol=5e-14)
    np.testing.assert_allclose(bessel_i(0, z), special.i0(z), rtol=5e-14)
    np.testing.assert_allclose(bessel_i(1, z), special.i1(z), rtol=5e-14)


def test_shape_and_scalar():
    assert np.ndim(bessel_j(0, 1.0)) == 0
    assert bessel_j(1, np.ones((2, 3))).shape == (2, 3)


def test_j1_ratio_limit_and_values():
    assert float(bessel_j1_ratio(0.0)) == 1.0
    for r in (1e-6, 0.5, 3.0, 20.0):
        ref = float(2 * mp.besselj(1, r) / r)
        assert abs(float(bessel_j1_ratio(r)) - ref) <= 1e-15


def test_invalid_order_and_input():
    with pytest.raises(DomainError):
        bessel_j(2, 1.0)
    with pytest.raises(DomainError):
        bessel_j(0, math.nan)


def test_i_overflow_guard():
    with pytest.raises(RangeError):
        bessel_i(0, I_OVERFLOW_GUARD + 1.0)


def test_accuracy_spec_validation():
    with pytest.raises(DomainError):
        BesselAccuracy(abs_tol=0.0)


@pytest.mark.parametrize("order,modified,z", [(0, False, 50.0), (1, False, -33.3),
                                               (0, True, 50.0), (1, True, 0.0)])
def test_series_oracle_matches_mpmath(order, modified, z):
    f = mp.besseli if modified else mp.besselj
    ref = float(f(order, z))
    assert abs(series_oracle(order, z, modified) - ref) <= 1e-16 * max(1.0, abs(ref))


@given(st.floats(min_value=-50, max_value=50))
def test_inequalities(z):
    j0, j1 = float(bessel_j(0, z)), float(bessel_j(1, z))
    assert abs(j0) <= 1.0 + 1e-15
    assert abs(j1) <= abs(z) / 2 + 1e-15
    if z >= 1e-8:   # below this e^z rounds to 1 in double precision
        i0, i1 = float(bessel_i(0, z)), float(bessel_i(1, z))
        assert i1 <= i0 < math.exp(z)


@given(st.floats(min_value=0.1, max_value=45))
def test_derivative_identity(z):
    # J0' = -J1, checked by central differences.
    h = 1e-5
    d = (float(bessel_j(0, z + h)) - float(bessel_j(0, z - h))) / (2 * h)
    assert abs(d + float(bessel_j(1, z))) <= 1e-8
