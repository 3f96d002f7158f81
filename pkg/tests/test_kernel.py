import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhr.errors import DomainError
from fhr.grid import Grid
from fhr.kernel import (KernelTable, QuadratureSpec, build_kernel_table, eval_H, eval_H1,
                        eval_H2, evaluate, heat_kernel, laplace_H_closed, laplace_numeric,
                        laplace_tail_time, moment_oracle, spatial_integral, thread_count,
                        verify_laplace)
from fhr.params import DEMO_PARAMS, ModelParams

mp.mp.dps = 30

HEAT_ONLY = ModelParams(a=1.0, D=1.0, eps=0.0, beta=0.8, delta=0.0, d=1.0)


def talbot(transform, t):
    """Inverse Laplace transform by Talbot's contour (extended precision)."""
    return float(mp.invertlaplace(transform, t, method="talbot"))


def transform_H(x, p, eps=None, delta=None):
    eps = p.eps if eps is None else eps
    delta = p.delta if delta is None else delta

    def F(s):
        sig = mp.sqrt(s + p.a + delta / (s + p.dd) + eps / (s + p.be))
        return mp.exp(-abs(x) * sig / mp.sqrt(p.D)) / (2 * mp.sqrt(p.D) * sig)
    return F


@pytest.mark.parametrize("x,t", [(0.0, 0.05), (0.7, 1.3), (-2.0, 3.0), (5.0, 0.8), (0.3, 12.0)])
def test_H_matches_laplace_inversion(demo, x, t):
    assert float(eval_H(x, t, demo)) == pytest.approx(talbot(transform_H(x, demo), t), abs=1e-12)


@pytest.mark.parametrize("x,t", [(0.0, 0.5), (1.5, 2.0)])
def test_H1_is_eps_only_kernel(demo, x, t):
    ref = talbot(transform_H(x, demo, delta=0.0), t)
    assert float(eval_H1(x, t, demo)) == pytest.approx(ref, abs=1e-12)


def test_H_equals_H1_minus_H2(demo):
    x, t = np.array([0.0, 0.4, 2.0]), 0.9
    np.testing.assert_allclose(eval_H(x, t, demo), eval_H1(x, t, demo) - eval_H2(x, t, demo),
                               atol=1e-14)


def test_damped_heat_kernel_reduction():
    assert float(eval_H(0.0, 1.0, HEAT_ONLY)) == pytest.approx(math.exp(-1) / (2 * math.sqrt(math.pi)), rel=1e-14)
    assert float(eval_H(0.0, 1.0, HEAT_ONLY)) == pytest.approx(0.103776874355149, rel=1e-12)
    assert float(eval_H2(0.7, 1.0, HEAT_ONLY)) == 0.0


def test_heat_kernel_closed_form(demo):
    x, t = 1.3, 0.4
    ref = math.exp(-x * x / (4 * t) - demo.a * t) / (2 * math.sqrt(math.pi * t))
    assert heat_kernel(x, t, demo) == pytest.approx(ref, rel=1e-15)


def test_even_in_x(demo):
    x = np.array([0.1, 1.0, 3.0])
    np.testing.assert_array_equal(eval_H(x, 1.0, demo), eval_H(-x, 1.0, demo))


@pytest.mark.parametrize("t", [0.0, -1.0, math.nan])
def test_nonpositive_time_is_domain_error(demo, t):
    with pytest.raises(DomainError):
        eval_H(1.0, t, demo)


def test_unknown_kind_and_form(demo):
    with pytest.raises(DomainError):
        evaluate(("Q",), 0.0, 1.0, demo)
    with pytest.raises(DomainError):
        evaluate(("H",), 0.0, 1.0, demo, form="other")


def test_laplace_closed_form_heat_reduction():
    s, x = 2.0, 0.5
    sig = math.sqrt(s + 1.0)
    assert laplace_H_closed(x, s, HEAT_ONLY) == pytest.approx(math.exp(-x * sig) / (2 * sig), rel=1e-15)


def test_laplace_identity_heat_reduction():
    res = verify_laplace([0.5, 2.0], [1.0, 4.0], HEAT_ONLY)
    assert np.max(res) <= 1e-8


def test_laplace_identity_demo_sample(demo):
    assert verify_laplace(1.0, 1.0, demo) <= 1e-10


def test_printed_delta_memory_misses_the_transform(demo):
    # The printed construction applies the delta-memory on H1's own time;
    # its transform is the eps-only one at s + delta/(s + delta d).
    res = verify_laplace(1.0, 1.0, demo, form="printed")
    assert 1e-4 < res < 1e-3
    s = 1.0 + demo.delta / (1.0 + demo.dd)
    sig = math.sqrt(s + demo.a + demo.eps / (s + demo.be))
    shifted = math.exp(-sig) / (2 * sig)
    num = laplace_numeric([1.0], [1.0], demo, form="printed")
    assert float(np.ravel(num)[0]) == pytest.approx(shifted, abs=1e-10)


def test_laplace_rejects_short_truncation(demo):
    with pytest.raises(DomainError):
        verify_laplace(1.0, 1.0, demo, t_max=1.0)
    T = laplace_tail_time(1.0, demo, 1e-12)
    assert T > 10.0


@pytest.mark.parametrize("t", [0.25, 1.0, 5.0])
def test_mass_matches_moment_oracle(demo, t):
    assert spatial_integral("H", t, demo) == pytest.approx(moment_oracle(t, demo), abs=1e-7)


def test_moment_oracle_heat_reduction():
    t = np.array([0.5, 2.0])
    np.testing.assert_allclose(moment_oracle(t, HEAT_ONLY), np.exp(-t), rtol=1e-9)
    assert moment_oracle(0.0, HEAT_ONLY) == 1.0


def test_moment_oracle_rejects_negative(demo):
    with pytest.raises(DomainError):
        moment_oracle(-1.0, demo)


@given(st.floats(min_value=0.05, max_value=6.0))
def test_absolute_mass_dominates_mass(t):
    m = spatial_integral("H", t, DEMO_PARAMS)
    m_abs = spatial_integral("H", t, DEMO_PARAMS, absolute=True)
    assert m_abs >= m - 1e-12


def test_quadrature_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(max_subdivisions=0)
    assert QuadratureSpec().options()["rel_tol"] == 1e-8


def test_kernel_table_layout_and_values(demo):
    g = Grid(-2.0, 2.0, 9, 1.0, 5)
    table = build_kernel_table(g, demo, threads=1)
    assert isinstance(table, KernelTable)
    assert table.values_H.shape == (2 * g.nx - 1, g.nt)
    centre = g.nx - 1
    assert table.values_H[centre, 0] == pytest.approx(1.0 / g.dx)
    assert np.all(table.values_H[np.arange(2 * g.nx - 1) != centre, 0] == 0.0)
    assert np.all(table.values("K")[:, 0] == 0.0)
    np.testing.assert_array_equal(table.values_H, table.values_H[::-1])
    direct = evaluate(("H", "K", "Hd"), g.offsets, g.t[3], demo)
    for name in ("H", "K", "Hd"):
        np.testing.assert_allclose(table.values(name)[:, 3], direct[name], rtol=1e-9, atol=1e-13)


def test_table_independent_of_thread_count(demo):
    g = Grid(-2.0, 2.0, 9, 1.0, 5)
    a = build_kernel_table(g, demo, threads=1)
    b = build_kernel_table(g, demo, threads=3)
    np.testing.assert_array_equal(a.values_H, b.values_H)


def test_thread_count_honours_environment(monkeypatch):
    monkeypatch.setenv("FHR_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("FHR_THREADS", "junk")
    assert thread_count() >= 1
