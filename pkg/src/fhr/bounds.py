"""A priori estimates for the kernels and the solution, and their checks.

Every function returning an *envelope* evaluates the right-hand side of
an inequality in closed form; :func:`check_run` compares those
envelopes against norms measured on a computed solution and returns one
:class:`BoundReport` per inequality.

Bound identifiers
-----------------
``u``, ``w``, ``y``
    Sup-norm estimates of the three solution components.
``H.pointwise``
    ``|H(x, t)|`` against a damped-heat-kernel envelope.
``H.L1.bessel``, ``H.L1.exp``
    ``int |H| dx`` against the ``I0`` form and ``lambda(t) e^{-q t}``.
``H.L1.time``
    ``int_0^t int |H| dx ds`` against ``S``.
``K.L1``, ``K.L1.time``
    ``int |K_delta| dx`` against ``lambda(t) E(t)``; time integral against ``M``.
``Hd.L1``, ``Hd.L1.time``
    ``int |H_delta| dx`` against ``g(t)``; time integral against
    ``(M + N)/|beta eps - delta d|``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DegenerateBoundConstant
from .kernel import DEFAULT_QUAD, build_kernel_table, spatial_integral
from .params import RATE_COINCIDENCE, bound_constants, envelope
from .specfun import I_OVERFLOW_GUARD, bessel_i

__all__ = [
    "BoundReport",
    "slack",
    "pointwise_H_bound",
    "l1_H_bounds",
    "kdelta_hdelta_bounds",
    "solution_bounds",
    "kernel_l1_norms",
    "sample_times",
    "check_run",
    "make_report",
    "pointwise_report",
]


def slack(envelope_values):
    """Numerical slack ``1e-7 + 1e-4 * envelope`` allowed on the observed side."""
    return 1e-7 + 1e-4 * np.abs(envelope_values)


@dataclass(frozen=True)
class BoundReport:
    """Observed norms against an envelope, per time slice.

    Attributes
    ----------
    bound_id : str
    times, observed, envelope, margin : ndarray
        ``margin = envelope - observed``.
    passed : bool
        ``min(margin + slack) >= 0``; ``True`` for skipped reports.
    skipped : str
        Reason the check is not applicable (empty when it ran).
    worst_time : float
        Time of the smallest relative margin.
    metadata : dict
    """

    bound_id: str
    times: np.ndarray
    observed: np.ndarray
    envelope: np.ndarray
    margin: np.ndarray
    passed: bool
    skipped: str = ""
    worst_time: float = math.nan
    metadata: dict = field(default_factory=dict)

    @property
    def row_pass(self):
        """Per-slice pass flags."""
        return self.margin + slack(self.envelope) >= 0

    def summary(self):
        if self.skipped:
            return f"{self.bound_id}: SKIPPED ({self.skipped})"
        status = "PASS" if self.passed else "FAIL"
        i = int(np.argmin(self.margin + slack(self.envelope)))
        return (f"{self.bound_id}: {status} worst t={self.times[i]:.4g} "
                f"observed={self.observed[i]:.6g} envelope={self.envelope[i]:.6g}")


def make_report(bound_id, times, observed, env, **metadata):
    """Build a :class:`BoundReport` from observed and envelope arrays."""
    times = np.asarray(times, dtype=float)
    observed = np.asarray(observed, dtype=float)
    env = np.broadcast_to(np.asarray(env, dtype=float), observed.shape).copy()
    margin = env - observed
    ok = margin + slack(env) >= 0
    rel = np.where(env > 0, margin / np.where(env > 0, env, 1.0), margin)
    worst = float(times[int(np.argmin(rel))]) if times.size else math.nan
    return BoundReport(bound_id, times, observed, env, margin, bool(np.all(ok)),
                       "", worst, dict(metadata))


def skipped_report(bound_id, times, reason, **metadata):
    n = len(times)
    nan = np.full(n, math.nan)
    return BoundReport(bound_id, np.asarray(times, dtype=float), nan, nan, nan,
                       True, reason, math.nan, dict(metadata))


def _abs_gap(r1, r2):
    """``|r1 - r2|`` or ``0`` for coincident rates (caller decides)."""
    if abs(r1 - r2) <= RATE_COINCIDENCE * (abs(r1) + abs(r2)):
        return 0.0
    return abs(r1 - r2)


def _safe_div(num, den):
    return num / den if den > 0 else math.inf


def pointwise_H_bound(x, t, p):
    """Pointwise envelope of ``|H(x, t)|``.

    ``G(x, t) [e^{-a t} + t eps A + delta t (1 + eps t/|a - be|) B
    + eps t/|a - be| C]`` with ``G`` the undamped heat kernel.
    Coincident ``a = beta eps`` makes the envelope infinite.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    gap = _abs_gap(p.a, p.be)

    def one(tt):
        A, B, C = (envelope(n, tt, p) for n in "ABC")
        r = _safe_div(p.eps * tt, gap)
        return (math.exp(-p.a * tt) + tt * p.eps * A
                + p.delta * tt * (1.0 + r) * B + r * C)

    bracket = np.vectorize(one, otypes=[float])(t)
    heat = np.exp(-x * x / (4.0 * p.D * t)) / (2.0 * np.sqrt(np.pi * p.D * t))
    return (heat * bracket)[()]


def _exp_i0(m, k, t):
    """``e^{-m t} I0(k t)`` without overflow for large ``|k| t``."""
    z = abs(k) * t
    if z <= I_OVERFLOW_GUARD:
        return math.exp(-m * t) * float(bessel_i(0, z))
    w = 1.0 / (8.0 * z)
    series = 1.0 + w + 4.5 * w * w + 37.5 * w ** 3
    return math.exp(-(m - abs(k)) * t) / math.sqrt(2.0 * math.pi * z) * series


def l1_H_bounds(t, p):
    """Two envelopes of ``int |H(x, t)| dx``.

    Returns
    -------
    bessel_form : float
        ``e^{-a t} + sqrt(eps) pi t e^{-(be+a)t/2} I0((be-a)t/2)
        + sqrt(delta) pi t [e^{-(dd+a)t/2} I0((dd-a)t/2)
        + sqrt(eps) pi t e^{-(dd+l)t/2} I0((dd-l)t/2)]``.
    exp_form : float
        ``lambda(t) e^{-q t}``.
    """
    a, be, dd, l = p.a, p.be, p.dd, p.l
    se, sd = math.sqrt(p.eps), math.sqrt(p.delta)
    bessel_form = (math.exp(-a * t)
                   + se * math.pi * t * _exp_i0((be + a) / 2, (be - a) / 2, t)
                   + sd * math.pi * t * (_exp_i0((dd + a) / 2, (dd - a) / 2, t)
                                         + se * math.pi * t * _exp_i0((dd + l) / 2, (dd - l) / 2, t)))
    exp_form = envelope("lambda", t, p) * math.exp(-p.q * t)
    return bessel_form, exp_form


def _ddccc(p):
    """``(M + N)/|beta eps - delta d|``."""
    gap = _abs_gap(p.be, p.dd)
    if gap == 0.0:
        raise DegenerateBoundConstant("(M+N)/|beta*eps - delta*d|", "|beta*eps - delta*d|")
    k = bound_constants(p, ("M", "N"))
    return (k.M + k.N) / gap


def pointwise_report(x, t, p, quad=DEFAULT_QUAD):
    """Check ``|H(x, t)|`` against :func:`pointwise_H_bound` on a grid.

    Parameters
    ----------
    x, t : array_like
        1-D sample positions and (positive) times; all pairs are checked.

    Returns
    -------
    BoundReport
        One row per ``(x, t)`` pair, ordered by time then position.
    """
    from .kernel import evaluate
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    H = evaluate(("H",), x[None, :], t[:, None], p, quad)["H"]
    env = pointwise_H_bound(x[None, :], t[:, None], p)
    times = np.repeat(t, len(x))
    return make_report("H.pointwise", times, np.abs(H).ravel(), env.ravel(),
                       positions=x.tolist())


def kdelta_hdelta_bounds(t, p, strict=True):
    """Envelopes of the ``K_delta`` and ``H_delta`` estimates at time ``t``.

    Returns
    -------
    dict
        ``b38 = lambda E``, ``dccc = t lambda E``, ``bbb38 = g``,
        ``bccc = h``, ``ccc = t lambda (C + L)/|dd - q|`` and
        ``ddccc = (M + N)/|be - dd|``.

    Raises
    ------
    DegenerateBoundConstant
        When ``strict`` and a constant or factor has a vanishing
        denominator; with ``strict=False`` such entries are ``nan``.
    """
    lam = envelope("lambda", t, p)
    E = envelope("E", t, p)
    out = {"b38": lam * E, "dccc": t * lam * E}

    def guarded(key, fn):
        try:
            out[key] = fn()
        except DegenerateBoundConstant:
            if strict:
                raise
            out[key] = math.nan

    def ccc():
        gap = _abs_gap(p.dd, p.q)
        if gap == 0.0:
            raise DegenerateBoundConstant("ccc", "|delta*d - q|")
        return t * lam * (envelope("C", t, p) + envelope("L", t, p)) / gap

    def gh(name):
        def fn():
            if _abs_gap(p.be, p.dd) == 0.0:
                raise DegenerateBoundConstant(name, "|beta*eps - delta*d|")
            return envelope(name, t, p)
        return fn

    guarded("bbb38", gh("g"))
    guarded("bccc", gh("h"))
    guarded("ccc", ccc)
    guarded("ddccc", lambda: _ddccc(p))
    return out


def solution_bounds(t, p, sups, which=("u", "w", "y")):
    """Sup-norm envelopes ``(Bu, Bw, By)`` of the solution at time ``t``.

    Parameters
    ----------
    t : float
    p : ModelParams
    sups : dict
        ``u0``, ``w0``, ``y0`` (initial sup-norms) and ``phi`` (sup of
        ``|phi|`` over the solution range).
    which : tuple of str
        Components to evaluate; the others are ``nan``.

    Returns
    -------
    (float, float, float)

    Raises
    ------
    DegenerateBoundConstant
        If ``w`` or ``y`` is requested and ``M`` (or ``N``, or the
        factor ``1/|dd - q|``) is undefined, or ``be = dd`` so that
        ``g`` and ``h`` diverge.
    """
    u0, w0, y0, ph = (float(sups[k]) for k in ("u0", "w0", "y0", "phi"))
    cb, hd = p.c / p.beta, p.h / p.d
    drive = abs(hd - cb)
    gap = abs(p.dd - p.be)
    lam = envelope("lambda", t, p)
    E = envelope("E", t, p)
    S = bound_constants(p, ("S",)).S
    Bu = Bw = By = math.nan
    if "u" in which:
        # |dd - be| g(t) = lambda (E + L) identically; the product form stays
        # finite when the two rates coincide.
        Bu = (u0 * lam * math.exp(-p.q * t) + (ph + drive) * S
              + (y0 + w0 + drive) * lam * E
              + (w0 + cb) * lam * (E + envelope("L", t, p)))
    if "w" in which or "y" in which:
        if _abs_gap(p.be, p.dd) == 0.0:
            raise DegenerateBoundConstant("w/y-bounds", "|beta*eps - delta*d|")
        k = bound_constants(p, ("M", "N") if "w" in which else ("M",))
    if "w" in which:
        dq = _abs_gap(p.dd, p.q)
        if dq == 0.0:
            raise DegenerateBoundConstant("w-bound", "|delta*d - q|")
        g = envelope("g", t, p)
        Bw = (w0 * math.exp(-p.be * t) + cb + p.eps * u0 * lam * E
              + p.eps * (ph + drive) * (2.0 * k.M + k.N)
              + p.eps * gap / dq * (cb + w0) * t * lam * (envelope("C", t, p) + envelope("L", t, p))
              + p.eps * (y0 + w0 + drive + gap * u0) * g)
    if "y" in which:
        hval = envelope("h", t, p)
        By = (y0 * math.exp(-p.dd * t) + hd + p.delta * u0 * lam * E
              + p.delta * (y0 + w0 + drive) * t * lam * E
              + p.delta * (ph + drive) * k.M + gap * (w0 + cb) * hval)
    return Bu, Bw, By


def kernel_l1_norms(table):
    """Per-time ``dx sum |K|`` over the table offsets for ``H``, ``K``, ``Hd``.

    Adequate for time integrals; for individual time slices prefer
    :func:`fhr.kernel.spatial_integral`, which resolves the narrow
    early-time profiles exactly.
    """
    dx = table.grid.dx
    return {name: dx * np.abs(table.values(name)).sum(axis=0) for name in ("H", "K", "Hd")}


def sample_times(grid, n=20):
    """Up to ``n`` positive grid times, geometrically spread from ``dt`` to ``t_max``."""
    idx = np.unique(np.round(np.geomspace(1, grid.nt - 1, n)).astype(int))
    return grid.t[idx]


def _running_time_integral(values, dt):
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (values[1:] + values[:-1]))])
    return np.maximum.accumulate(cum)


def check_run(sol, p, data, table=None, quad=DEFAULT_QUAD, phi_norm=None,
              kernel_times=None):
    """Compare a computed solution and its kernels against every estimate.

    Parameters
    ----------
    sol : SolutionField
    p : ModelParams
    data : InitialData
    table : KernelTable, optional
        Kernel table on ``sol.grid``; built when omitted.
    phi_norm : float, optional
        ``sup |phi|`` to use; defaults to ``sol.phi_norm``.
    kernel_times : array_like, optional
        Times of the per-slice kernel L1 checks (default
        :func:`sample_times`); time-integrated checks use every grid time.

    Returns
    -------
    list of BoundReport
        Degenerate estimates appear as skipped reports.
    """
    grid = sol.grid
    t = grid.t
    u0, w0, y0 = data.sups()
    ph = sol.phi_norm if phi_norm is None else phi_norm
    sups = {"u0": u0, "w0": w0, "y0": y0, "phi": ph}
    meta = {"phi_norm": ph, "phi_norm_rule": "sup |phi| over realised u range, +10%"}
    reports = []
    for comp, field_ in (("u", sol.u), ("w", sol.w), ("y", sol.y)):
        try:
            env = np.array([solution_bounds(tk, p, sups, which=(comp,))["uwy".index(comp)]
                            for tk in t])
        except DegenerateBoundConstant as exc:
            reports.append(skipped_report(comp, t, f"not applicable: degenerate rates ({exc})", **meta))
            continue
        reports.append(make_report(comp, t, field_.sup_norm(axis=0), env, **meta))

    if table is None:
        table = build_kernel_table(grid, p, quad)
    norms = kernel_l1_norms(table)
    tk = sample_times(grid) if kernel_times is None else np.asarray(kernel_times, dtype=float)
    l1 = {k: spatial_integral(k, tk, p, quad, absolute=True) for k in ("H", "K", "Hd")}
    pairs = [l1_H_bounds(x, p) for x in tk]
    reports.append(make_report("H.L1.bessel", tk, l1["H"], [b for b, _ in pairs]))
    reports.append(make_report("H.L1.exp", tk, l1["H"], [e for _, e in pairs]))
    S = bound_constants(p, ("S",)).S
    reports.append(make_report("H.L1.time", t, _running_time_integral(norms["H"], grid.dt), S))
    reports.append(make_report("K.L1", tk, l1["K"],
                               [kdelta_hdelta_bounds(x, p, strict=False)["b38"] for x in tk]))
    if _abs_gap(p.be, p.dd) == 0.0:
        reports.append(skipped_report("Hd.L1", tk, "not applicable: beta*eps = delta*d"))
    else:
        reports.append(make_report("Hd.L1", tk, l1["Hd"], envelope("g", tk, p)))
    try:
        M = bound_constants(p, ("M",)).M
        reports.append(make_report("K.L1.time", t, _running_time_integral(norms["K"], grid.dt), M))
    except DegenerateBoundConstant as exc:
        reports.append(skipped_report("K.L1.time", t, f"not applicable: degenerate rates ({exc})"))
    try:
        val = _ddccc(p)
        reports.append(make_report("Hd.L1.time", t, _running_time_integral(norms["Hd"], grid.dt), val))
    except DegenerateBoundConstant as exc:
        reports.append(skipped_report("Hd.L1.time", t, f"not applicable: degenerate rates ({exc})"))
    return reports
