import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sint

from fhr.errors import AccuracyError
from fhr.quadrature import G10_WEIGHTS, GK21_NODES, GK21_WEIGHTS, gauss_legendre, integrate


def test_rule_weights_sum_to_interval_length():
    assert GK21_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert G10_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert np.all(np.diff(GK21_NODES) > 0)


@pytest.mark.parametrize("k", range(0, 31))
def test_kronrod_exact_for_polynomials(k):
    exact = (1 - (-1) ** (k + 1)) / (k + 1)
    assert np.dot(GK21_WEIGHTS, GK21_NODES ** k) == pytest.approx(exact, abs=1e-14)


def test_scalar_integrand_matches_scipy():
    f = lambda x: np.exp(-x) * np.cos(3 * x)
    val, err = integrate(lambda x: f(x), 0.0, 10.0, rel_tol=1e-12, abs_tol=1e-15)
    ref, _ = sint.quad(f, 0.0, 10.0, epsabs=1e-14, epsrel=1e-13)
    assert float(val) == pytest.approx(ref, abs=1e-12)
    assert float(err) <= 1e-10


def test_endpoint_singularity_converges():
    val, _ = integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, rel_tol=1e-10, abs_tol=1e-14,
                       max_subdivisions=5000)
    assert float(val) == pytest.approx(2.0, rel=1e-9)


def test_batch_shares_mesh_and_meets_each_tolerance():
    k = np.array([1.0, 5.0, 20.0])
    val, _ = integrate(lambda x: np.sin(k[:, None] * x[None, :]), 0.0, math.pi,
                       rel_tol=1e-11, abs_tol=1e-14)
    ref = (1 - np.cos(k * math.pi)) / k
    np.testing.assert_allclose(val, ref, atol=1e-12)


def test_breakpoints_are_used():
    f = lambda x: np.abs(x - 0.3)
    val, _ = integrate(f, 0.0, 1.0, breakpoints=[0.3], rel_tol=1e-14, abs_tol=1e-16)
    assert float(val) == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-15)


def test_budget_exhaustion_raises():
    with pytest.raises(AccuracyError):
        integrate(lambda x: np.sin(1.0 / (x + 1e-9)), 0.0, 1.0, rel_tol=1e-14,
                  abs_tol=1e-16, max_subdivisions=20)


@given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=40))
def test_gauss_legendre_exactness(n, k):
    x, w = gauss_legendre(n)
    if k <= 2 * n - 1:
        assert np.dot(w, x ** k) == pytest.approx(1.0 / (k + 1), rel=1e-12)
    assert np.all((x > 0) & (x < 1))
