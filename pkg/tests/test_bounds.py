import math

import numpy as np
import pytest
from scipy import special

from fhr.bounds import (BoundReport, _exp_i0, check_run, kdelta_hdelta_bounds, kernel_l1_norms,
                        l1_H_bounds, make_report, pointwise_H_bound, pointwise_report,
                        sample_times, slack, solution_bounds)
from fhr.errors import DegenerateBoundConstant
from fhr.grid import Field, Grid
from fhr.kernel import build_kernel_table, spatial_integral
from fhr.params import DEMO_PARAMS, ModelParams, bound_constants, envelope, validate
from fhr.solver import InitialData, SolutionField, initial_profile, picard_solve

HEAT_ONLY = ModelParams(a=1.0, D=1.0, eps=0.0, beta=0.8, delta=0.0, d=1.0)


def test_slack_and_report_construction():
    assert slack(0.0) == 1e-7
    rep = make_report("x", [0.0, 1.0], [1.0, 2.0], [1.5, 2.0])
    assert isinstance(rep, BoundReport) and rep.passed
    np.testing.assert_array_equal(rep.margin, [0.5, 0.0])
    bad = make_report("x", [0.0, 1.0], [1.0, 2.1], 2.0)
    assert not bad.passed and bad.worst_time == 1.0
    assert "FAIL" in bad.summary()
    np.testing.assert_array_equal(bad.row_pass, [True, False])


def test_pointwise_bound_tight_for_heat_kernel():
    x, t = np.array([0.0, 1.0, 2.5]), 0.7
    heat = np.exp(-x ** 2 / (4 * t) - t) / (2 * np.sqrt(np.pi * t))
    np.testing.assert_allclose(pointwise_H_bound(x, t, HEAT_ONLY), heat, rtol=1e-15)


def test_pointwise_report_demo(demo):
    rep = pointwise_report(np.linspace(-4, 4, 9), np.array([0.1, 1.0, 4.0]), demo)
    assert rep.passed
    assert len(rep.times) == 27


def test_exp_i0_matches_scaled_bessel():
    for m, k, t in [(0.3, 0.2, 5.0), (0.5, -0.4, 3000.0), (0.1, 0.1, 8000.0)]:
        z = abs(k) * t
        ref = math.exp(-(m - abs(k)) * t) * special.i0e(z)
        assert _exp_i0(m, k, t) == pytest.approx(ref, rel=1e-9)


def test_l1_bounds_reduce_to_damped_mass():
    b, e = l1_H_bounds(2.0, HEAT_ONLY)
    assert b == pytest.approx(math.exp(-2.0), rel=1e-15)
    # q = min(a, beta eps, delta d) = 0 here, so the exponential form is 1.
    assert e == 1.0


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0, 8.0])
def test_l1_bounds_hold(demo, t):
    l1 = spatial_integral("H", t, demo, absolute=True)
    b, e = l1_H_bounds(t, demo)
    assert l1 <= b and l1 <= e


def test_kdelta_hdelta_bounds_degenerate_demo(demo):
    with pytest.raises(DegenerateBoundConstant):
        kdelta_hdelta_bounds(1.0, demo)
    out = kdelta_hdelta_bounds(1.0, demo, strict=False)
    assert math.isnan(out["ccc"]) and math.isnan(out["ddccc"])
    assert all(math.isfinite(out[k]) for k in ("b38", "dccc", "bbb38", "bccc"))


def test_kdelta_hdelta_bounds_nondegenerate(nondegenerate):
    out = kdelta_hdelta_bounds(1.0, nondegenerate)
    assert len(out) == 6 and all(math.isfinite(v) and v > 0 for v in out.values())
    p = nondegenerate
    k = bound_constants(p)
    assert out["ddccc"] == pytest.approx((k.M + k.N) / abs(p.be - p.dd), rel=1e-14)
    assert out["b38"] == pytest.approx(envelope("lambda", 1.0, p) * envelope("E", 1.0, p))


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
def test_kernel_l1_envelopes_hold(nondegenerate, t):
    p = nondegenerate
    env = kdelta_hdelta_bounds(t, p)
    assert spatial_integral("K", t, p, absolute=True) <= env["b38"]
    assert spatial_integral("Hd", t, p, absolute=True) <= env["bbb38"]


def test_solution_bounds_u_formula(nondegenerate):
    p = nondegenerate
    sups = {"u0": 0.5, "w0": 0.1, "y0": 0.2, "phi": 0.3}
    t = 2.0
    Bu, Bw, By = solution_bounds(t, p, sups)
    lam, E = envelope("lambda", t, p), envelope("E", t, p)
    drive = abs(p.h / p.d - p.c / p.beta)
    gap = abs(p.dd - p.be)
    ref = (0.5 * lam * math.exp(-p.q * t) + (0.3 + drive) * bound_constants(p, ("S",)).S
           + (0.2 + 0.1 + drive) * lam * E + (0.1 + p.c / p.beta) * gap * envelope("g", t, p))
    assert Bu == pytest.approx(ref, rel=1e-14)
    assert Bw > p.c / p.beta and By > p.h / p.d


def test_solution_bounds_degenerate_wy(demo):
    sups = {"u0": 0.5, "w0": 0.0, "y0": 0.0, "phi": 0.3}
    Bu, _, _ = solution_bounds(1.0, demo, sups, which=("u",))
    assert math.isfinite(Bu)
    with pytest.raises(DegenerateBoundConstant):
        solution_bounds(1.0, demo, sups, which=("w",))



def test_solution_bounds_coincident_rates(nondegenerate):
    p = nondegenerate.with_(eps=nondegenerate.dd / nondegenerate.beta)
    sups = {"u0": 0.5, "w0": 0.1, "y0": 0.2, "phi": 0.3}
    Bu, _, _ = solution_bounds(2.0, p, sups, which=("u",))
    near = p.with_(eps=p.eps * (1.0 + 1e-6))
    Bu_near, _, _ = solution_bounds(2.0, near, sups, which=("u",))
    assert math.isfinite(Bu) and Bu == pytest.approx(Bu_near, rel=1e-4)
    for which in (("w",), ("y",)):
        with pytest.raises(DegenerateBoundConstant):
            solution_bounds(2.0, p, sups, which=which)

def test_sample_times():
    g = Grid(0, 1, 3, 2.0, 201)
    t = sample_times(g)
    assert 0 < t[0] == g.dt and t[-1] == g.t_max
    assert np.all(np.diff(t) > 0) and len(t) <= 20


GRID = Grid(-15.0, 15.0, 151, 1.0, 51)


@pytest.fixture(scope="module")
def run():
    p = validate(DEMO_PARAMS.with_(a=0.02, c=0.0, h=0.0))
    table = build_kernel_table(GRID, p)
    data = InitialData(initial_profile(GRID.x, "gaussian", 0.0, 2.0, 0.001),
                       np.zeros(GRID.nx), np.zeros(GRID.nx))
    return p, table, data, picard_solve(data, GRID, p, table)


def test_check_run_all_pass(run):
    p, table, data, sol = run
    reports = check_run(sol, p, data, table)
    ids = [r.bound_id for r in reports]
    assert ids == ["u", "w", "y", "H.L1.bessel", "H.L1.exp", "H.L1.time", "K.L1",
                   "Hd.L1", "K.L1.time", "Hd.L1.time"]
    assert all(r.passed and not r.skipped for r in reports), [r.summary() for r in reports]


def test_check_run_fault_injection_fails_only_u(run):
    p, table, data, sol = run
    tampered = SolutionField(GRID, Field(GRID, 100 * sol.u.values), sol.w, sol.y,
                             phi_norm=sol.phi_norm)
    reports = check_run(tampered, p, data, table)
    assert [r.bound_id for r in reports if not r.passed] == ["u"]


def test_check_run_reports_degenerate_skips(demo):
    g = Grid(-5, 5, 41, 0.5, 11)
    table = build_kernel_table(g, demo)
    sol = SolutionField(g, *(Field(g, np.zeros((g.nx, g.nt))) for _ in range(3)))
    reports = check_run(sol, demo, InitialData.zeros(g), table, phi_norm=0.0)
    skipped = {r.bound_id for r in reports if r.skipped}
    assert skipped == {"w", "y", "K.L1.time", "Hd.L1.time"}
    assert all(r.passed for r in reports)


def test_kernel_l1_norms_from_table(demo):
    g = Grid(-6, 6, 121, 1.0, 5)
    norms = kernel_l1_norms(build_kernel_table(g, demo))
    assert norms["H"][-1] == pytest.approx(spatial_integral("H", 1.0, demo, absolute=True), rel=1e-6)
