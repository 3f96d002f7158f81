"""Fundamental solution of the linear integro-differential operator.

Eliminating ``w`` and ``y`` from the linearised system leaves, for
``u`` alone, the operator

.. math::

    L u = u_t - D u_{xx} + a u
          + \\varepsilon \\int_0^t e^{-\\beta\\varepsilon (t-\\tau)} u \\, d\\tau
          + \\delta \\int_0^t e^{-\\delta d (t-\\tau)} u \\, d\\tau .

Its fundamental solution ``H`` has the Laplace transform
``e^{-|x| sigma/sqrt(D)} / (2 sqrt(D) sigma)`` with
``sigma^2 = s + a + delta/(s + delta d) + eps/(s + beta eps)``.

Representation
--------------
Every kernel used here is a *subordinated heat kernel*

.. math::

    \\int_0^t G_a(x, z) \\, W(z, t - z) \\, dz, \\qquad
    G_a(x, z) = \\frac{e^{-x^2/(4Dz) - a z}}{2\\sqrt{\\pi D z}},

where ``z`` is the diffusion time and ``W`` ("clock") is built from the
Bessel memory kernels

* ``k_eps(z, s) = eps z e^{-beta eps s} 2 J1(r)/r``, ``r = 2 sqrt(eps z s)``,
* ``k_delta(z, s)``, the same with ``(delta, delta d)``,
* ``j_eps(z, s) = e^{-beta eps s} J0(2 sqrt(eps z s))`` and ``j_delta``.

With ``*`` the convolution in the memory time ``s``:

=========  ==============================================  ==========
kernel     clock ``W``                                       sign
=========  ==============================================  ==========
``H1``     ``k_eps``                                         ``G - I``
``H``      ``k_eps + k_delta - k_eps * k_delta``             ``G - I``
``H2``     ``k_delta - k_eps * k_delta``  (``H1 - H``)       ``I``
``K``      ``j_delta - k_eps * j_delta``  (``e^{-dd t} * H``)  ``I``
``Hd``     ``j_eps * j_delta``  (``e^{-be t} * K``)          ``I``
=========  ==============================================  ==========

Both Bessel memories act on the same diffusion time ``z``; this is what
makes ``H`` reproduce the closed-form transform.  The alternative
*printed* construction, in which the ``delta``-memory is applied to
``H1`` as a function of *its* time argument
(``H2 = int_0^t H1(x, y) k_delta(y, t - y) dy``), is available through
``form="printed"``; its transform is the ``eps``-only transform with
``s`` replaced by ``s + delta/(s + delta d)``.

Numerics
--------
The substitution ``z = t v^2`` turns ``G_a dz`` into the bounded, smooth
weight ``sqrt(t/(pi D)) exp(-x^2/(4 D t v^2) - a t v^2) dv`` on
``[0, 1]``, which is integrated by the shared-mesh adaptive
Gauss--Kronrod rule of :mod:`fhr.quadrature`.  The inner memory
convolutions have entire integrands and use fixed Gauss--Legendre rules.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AccuracyError, DomainError
from .grid import Grid
from .params import envelope
from .quadrature import gauss_legendre, integrate
from .specfun import bessel_j, bessel_j1_ratio

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUAD",
    "KernelTable",
    "KERNEL_KINDS",
    "heat_kernel",
    "evaluate",
    "eval_H1",
    "eval_H2",
    "eval_H",
    "laplace_H_closed",
    "laplace_numeric",
    "laplace_tail_time",
    "verify_laplace",
    "moment_oracle",
    "spatial_integral",
    "build_kernel_table",
    "thread_count",
]

KERNEL_KINDS = ("H", "H1", "H2", "K", "Hd")
FORMS = ("exact", "printed")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive kernel integrals.

    Attributes
    ----------
    rel_tol, abs_tol : float
        An integral ``I`` is accepted when its error estimate is below
        ``max(abs_tol, rel_tol |I|)``.
    max_subdivisions : int
        Cap on the number of adaptive subintervals.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")

    def options(self):
        return dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                    max_subdivisions=self.max_subdivisions)


DEFAULT_QUAD = QuadratureSpec()

# Initial mesh in v = sqrt(z/t): graded towards v = 0, where the Gaussian
# factor switches on for x != 0.
_V_BREAKS = np.concatenate([0.5 ** np.arange(7, 0, -1), [0.625, 0.75, 0.875]])


# --------------------------------------------------------------------------
# Clock functions
# --------------------------------------------------------------------------

def heat_kernel(x, t, p):
    """Damped heat kernel ``e^{-x^2/(4Dt) - a t} / (2 sqrt(pi D t))``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return (np.exp(-x * x / (4.0 * p.D * t) - p.a * t)
            / (2.0 * np.sqrt(np.pi * p.D * t)))[()]


def _k1(c, r, z, s):
    return np.exp(-r * s) * c * z * bessel_j1_ratio(2.0 * np.sqrt(c * z * s))


def _k0(c, r, z, s):
    return np.exp(-r * s) * bessel_j(0, 2.0 * np.sqrt(c * z * s))


def _inner_order(z, s, p):
    """Gauss--Legendre order for memory convolutions on ``[0, s]``."""
    phase = 2.0 * np.sqrt(np.max(z * s)) * (math.sqrt(p.eps) + math.sqrt(p.delta))
    decay = np.max(s) * max(p.be, p.dd)
    return int(min(160, 12 + 2.0 * phase + decay))


_CLOCK_NEEDS = {
    "H1": (),
    "H": ("ke*kd",),
    "H2": ("ke*kd",),
    "K": ("ke*jd",),
    "Hd": ("je*jd",),
}


def _clocks(kinds, z, s, p):
    """Clock values ``W_kind(z, s)`` stacked along a new leading axis."""
    ke = lambda zz, ss: _k1(p.eps, p.be, zz, ss)
    kd = lambda zz, ss: _k1(p.delta, p.dd, zz, ss)
    je = lambda zz, ss: _k0(p.eps, p.be, zz, ss)
    jd = lambda zz, ss: _k0(p.delta, p.dd, zz, ss)
    pairs = {"ke*kd": (ke, kd), "ke*jd": (ke, jd), "je*jd": (je, jd)}
    need = sorted({c for k in kinds for c in _CLOCK_NEEDS[k]})
    convs = {}
    if need:
        n = _inner_order(z, s, p)
        u, w = gauss_legendre(n)
        zf, sf = z.ravel(), s.ravel()
        for name in need:
            convs[name] = np.empty_like(zf)
        step = max(1, 400_000 // n)
        for i in range(0, zf.size, step):
            zc = zf[i:i + step, None]
            sc = sf[i:i + step, None]
            sig = sc * u
            for name in need:
                f, g = pairs[name]
                convs[name][i:i + step] = (f(zc, sig) * g(zc, sc - sig)) @ w * sf[i:i + step]
        for name in need:
            convs[name] = convs[name].reshape(z.shape)
    out = []
    cache = {}

    def get(key, fn):
        if key not in cache:
            cache[key] = fn(z, s)
        return cache[key]

    for k in kinds:
        if k == "H1":
            out.append(get("ke", ke))
        elif k == "H":
            out.append(get("ke", ke) + get("kd", kd) - convs["ke*kd"])
        elif k == "H2":
            out.append(get("kd", kd) - convs["ke*kd"])
        elif k == "K":
            out.append(get("jd", jd) - convs["ke*jd"])
        elif k == "Hd":
            out.append(convs["je*jd"])
    return np.stack(out)


def _subordinate(kinds, x, t, p, quad):
    """``int_0^t G_a(x, z) W_kind(z, t - z) dz`` for each kind, elementwise in (x, t)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()
    ut, inv = np.unique(tf, return_inverse=True)
    inv = inv.ravel()
    pref = np.sqrt(ut / (np.pi * p.D))[inv][:, None]
    x2 = (xf * xf)[:, None]

    def f(v):
        v2 = v * v
        z = ut[:, None] * v2
        W = _clocks(kinds, z, ut[:, None] * (1.0 - v2), p)
        zp = z[inv]
        g = pref * np.exp(-x2 / (4.0 * p.D * zp) - p.a * zp)
        return W[:, inv, :] * g[None]

    try:
        vals, _ = integrate(f, 0.0, 1.0, breakpoints=_V_BREAKS, **quad.options())
    except AccuracyError as exc:
        raise AccuracyError(str(exc), exc.estimate,
                            where=f"x in [{xf.min():g}, {xf.max():g}], "
                                  f"t in [{tf.min():g}, {tf.max():g}]") from exc
    return {k: vals[i].reshape(shape) for i, k in enumerate(kinds)}


def _printed_memory(x, t, p, quad, clock):
    """``int_0^t H1(x, y) clock(y, t - y) dy`` (memory applied on H1's own time)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()

    def f(v):
        y = tf[:, None] * v * v
        h1 = _evaluate_exact(("H1",), xf[:, None], y, p, quad)["H1"]
        return 2.0 * tf[:, None] * v * h1 * clock(y, tf[:, None] - y)

    vals, _ = integrate(f, 0.0, 1.0, breakpoints=_V_BREAKS, **quad.options())
    return vals.reshape(shape)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("kernel time must be finite and strictly positive "
                          "(the t -> 0 limit is a Dirac distribution)")


def _evaluate_exact(kinds, x, t, p, quad):
    I = _subordinate(kinds, x, t, p, quad)
    out = {}
    for k in kinds:
        if k in ("H1", "H"):
            out[k] = heat_kernel(x, t, p) - I[k]
        else:
            out[k] = I[k]
    return out


def evaluate(kinds, x, t, p, quad=DEFAULT_QUAD, form="exact"):
    """Evaluate several kernels on a shared quadrature mesh.

    Parameters
    ----------
    kinds : sequence of str
        Subset of :data:`KERNEL_KINDS`.
    x, t : array_like
        Broadcastable positions and (strictly positive) times.
    p : ModelParams
    quad : QuadratureSpec
    form : {"exact", "printed"}
        Construction of the ``delta``-memory (see module docstring).

    Returns
    -------
    dict
        ``kind -> ndarray`` of the broadcast shape.
    """
    _check_t(t)
    kinds = tuple(kinds)
    unknown = set(kinds) - set(KERNEL_KINDS)
    if unknown:
        raise DomainError(f"unknown kernel kinds {sorted(unknown)}")
    if form not in FORMS:
        raise DomainError(f"form must be one of {FORMS}")
    if form == "exact" or set(kinds) <= {"H1"}:
        return _evaluate_exact(kinds, x, t, p, quad)
    out = {}
    if "H1" in kinds or "H" in kinds:
        out["H1"] = _evaluate_exact(("H1",), x, t, p, quad)["H1"]
    if "H2" in kinds or "H" in kinds:
        out["H2"] = _printed_memory(x, t, p, quad, lambda y, s: _k1(p.delta, p.dd, y, s))
    if "H" in kinds:
        out["H"] = out["H1"] - out["H2"]
    if "K" in kinds:
        out["K"] = _printed_memory(x, t, p, quad, lambda y, s: _k0(p.delta, p.dd, y, s))
    if "Hd" in kinds:
        from .convolution import eval_H_delta
        out["Hd"] = eval_H_delta(x, t, p, quad, form="printed")
    return {k: np.asarray(out[k])[()] for k in kinds}


def eval_H1(x, t, p, quad=DEFAULT_QUAD):
    """Heat kernel minus the ``eps``-memory correction.

    ``H1(x, t) = G_a(x, t) - int_0^t G_a(x, y) k_eps(y, t - y) dy``.

    Parameters
    ----------
    x : float or array_like
    t : float or array_like
        Strictly positive.
    p : ModelParams
    quad : QuadratureSpec, optional

    Returns
    -------
    float or ndarray

    Raises
    ------
    DomainError
        If any ``t <= 0``.
    AccuracyError
        If the quadrature does not converge.
    """
    return evaluate(("H1",), x, t, p, quad)["H1"]


def eval_H2(x, t, p, quad=DEFAULT_QUAD, form="exact"):
    """Correction ``H2 = H1 - H`` carrying the ``delta``-memory.

    With ``form="printed"`` the memory acts on ``H1``'s own time:
    ``int_0^t H1(x, y) e^{-delta d (t-y)} sqrt(delta y/(t-y))
    J1(2 sqrt(delta y (t-y))) dy``.
    """
    return evaluate(("H2",), x, t, p, quad, form)["H2"]


def eval_H(x, t, p, quad=DEFAULT_QUAD, form="exact"):
    """Fundamental solution ``H = H1 - H2`` (even in ``x``, defined for ``t > 0``)."""
    return evaluate(("H",), x, t, p, quad, form)["H"]


# --------------------------------------------------------------------------
# Laplace transform
# --------------------------------------------------------------------------

def _check_s(s, p):
    s = np.asarray(s, dtype=float)
    lim = max(-p.a, -p.be, -p.dd)
    if not np.all(np.isfinite(s)) or np.any(s <= lim):
        raise DomainError(f"s must exceed {lim} (convergence half-plane)")
    return s


def laplace_H_closed(x, s, p):
    """Closed-form Laplace transform of ``H`` in time.

    ``e^{-|x| sigma / sqrt(D)} / (2 sqrt(D) sigma)`` with
    ``sigma = sqrt(s + a + delta/(s + delta d) + eps/(s + beta eps))``.
    """
    s = _check_s(s, p)
    x = np.asarray(x, dtype=float)
    sigma = np.sqrt(s + p.a + p.delta / (s + p.dd) + p.eps / (s + p.be))
    return (np.exp(-np.abs(x) * sigma / math.sqrt(p.D)) / (2.0 * math.sqrt(p.D) * sigma))[()]


def laplace_tail_time(s, p, tol):
    """Smallest ``T`` with ``lambda(T) e^{-(q+s) T} / (q+s) < tol``.

    The bound uses the L1 estimate ``int |H| dx <= lambda(t) e^{-q t}``,
    which also dominates ``|H(x, t)|`` integrated over ``t > T`` at any
    fixed ``x`` only in the L1 sense; the pointwise tail is smaller for
    ``t`` beyond the diffusive spreading time.
    """
    r = p.q + float(s)

    def bound(T):
        return envelope("lambda", T, p) * math.exp(-r * T) / r

    T = 1.0
    while bound(T) >= tol:
        T *= 1.5
    lo = T / 1.5 if T > 1.0 else 0.0
    hi = T
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if bound(mid) >= tol:
            lo = mid
        else:
            hi = mid
    return hi


def laplace_numeric(x, s, p, quad=DEFAULT_QUAD, t_max=None, form="exact"):
    """Numerical Laplace transform ``int_0^{t_max} e^{-s t} H(x, t) dt``.

    Parameters
    ----------
    x : array_like
        Positions (1-D); every position shares one quadrature mesh.
    s : array_like
        Transform variables (1-D).
    t_max : float, optional
        Truncation time; chosen from the L1 tail bound when omitted.

    Returns
    -------
    ndarray
        Shape ``(len(x), len(s))``.

    Notes
    -----
    The substitution ``t = tau^2`` removes the ``t^{-1/2}`` behaviour of
    ``H(0, t)`` at the origin.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = _check_s(np.atleast_1d(s), p)
    if t_max is None:
        t_max = laplace_tail_time(float(np.min(s)), p, quad.abs_tol)
    rt = math.sqrt(t_max)

    def f(tau):
        t = tau * tau
        H = evaluate(("H",), x[:, None], t[None, :], p, quad, form)["H"]
        return 2.0 * tau[None, None, :] * np.exp(-s[None, :, None] * t) * H[:, None, :]

    breaks = np.linspace(0.0, rt, 9)[1:-1]
    vals, _ = integrate(f, 0.0, rt, breakpoints=breaks, **quad.options())
    return vals


def verify_laplace(x, s, p, quad=DEFAULT_QUAD, t_max=None, form="exact"):
    """Residual ``|numeric transform - closed form|`` of ``H``.

    Parameters
    ----------
    x, s : float or array_like
        Positions and transform variables; the residual is returned on
        the outer-product grid ``(len(x), len(s))`` (scalar for scalars).
    t_max : float, optional
        Truncation time.  Must satisfy the tail condition
        ``lambda(t_max) e^{-(q+s) t_max}/(q+s) < quad.abs_tol``; chosen
        automatically when omitted.

    Raises
    ------
    DomainError
        If ``s`` is outside the convergence half-plane or ``t_max`` is
        too short.
    """
    scalar = np.ndim(x) == 0 and np.ndim(s) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    sa = _check_s(np.atleast_1d(s), p)
    if t_max is not None:
        needed = laplace_tail_time(float(np.min(sa)), p, quad.abs_tol)
        if t_max < needed:
            raise DomainError(f"t_max={t_max} too short; tail bound needs t_max >= {needed:.4g}")
    num = laplace_numeric(xa, sa, p, quad, t_max, form)
    res = np.abs(num - laplace_H_closed(xa[:, None], sa[None, :], p))
    return float(res[0, 0]) if scalar else res


# --------------------------------------------------------------------------
# Moment oracle and spatial quadrature
# --------------------------------------------------------------------------

def moment_oracle(t, p, rtol=1e-10, atol=1e-12):
    """Total mass ``m(t) = int H(x, t) dx`` from its ODE.

    Integrating the operator over space shows that ``m`` is the
    ``u``-component of ``u' = -a u - w + y``, ``w' = eps(-beta w + u)``,
    ``y' = delta(-u - d y)`` with ``u(0) = 1``, ``w(0) = y(0) = 0``.

    Parameters
    ----------
    t : float or array_like
        Nonnegative times.

    Returns
    -------
    float or ndarray
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("moment time must be finite and nonnegative")
    tf = t.ravel()
    T = float(tf.max()) if tf.size else 0.0
    if T == 0.0:
        return np.ones_like(t)[()]

    def rhs(_, z):
        u, w, y = z
        return [-p.a * u - w + y, p.eps * (-p.beta * w + u), p.delta * (-u - p.d * y)]

    ts = np.unique(tf)
    sol = solve_ivp(rhs, (0.0, T), [1.0, 0.0, 0.0], method="DOP853",
                    t_eval=ts, rtol=rtol, atol=atol)
    if not sol.success:
        raise AccuracyError(f"moment ODE failed: {sol.message}")
    return np.interp(tf, sol.t, sol.y[0]).reshape(t.shape)[()]


def spatial_integral(kind, t, p, quad=DEFAULT_QUAD, absolute=False, form="exact"):
    """``int_R K(x, t) dx`` (or of ``|K|``) by adaptive quadrature.

    The kernels are even in ``x`` and decay like ``e^{-x^2/(4Dt)}``; the
    integral is taken over ``0 <= x <= L = 8 sqrt(4 D t)`` with the
    substitution ``x = L xi^2``, which smooths the ``|x|`` kink that
    ``K_delta`` and ``H_delta`` have at the origin.

    Parameters
    ----------
    kind : str
        One of :data:`KERNEL_KINDS`.
    t : float or array_like
        Strictly positive times.
    absolute : bool
        Integrate ``|K|`` instead of ``K``.

    Returns
    -------
    float or ndarray
    """
    _check_t(t)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    for i, ti in enumerate(t_arr.ravel()):
        L = 8.0 * math.sqrt(4.0 * p.D * ti)

        def f(xi):
            vals = evaluate((kind,), L * xi * xi, ti, p, quad, form)[kind]
            if absolute:
                vals = np.abs(vals)
            return 4.0 * L * xi * vals

        val, _ = integrate(f, 0.0, 1.0, breakpoints=np.linspace(0, 1, 9)[1:-1],
                           rel_tol=10 * quad.rel_tol, abs_tol=quad.abs_tol,
                           max_subdivisions=quad.max_subdivisions)
        out.flat[i] = val
    return out.reshape(np.shape(t))[()]


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------

def thread_count():
    """Worker threads for table construction (``FHR_THREADS`` caps it)."""
    env = os.environ.get("FHR_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = max(1, min(n, int(env)))
        except ValueError:
            pass
    return n


@dataclass(frozen=True)
class KernelTable:
    """Samples of ``H``, ``K_delta`` and ``H_delta`` on grid offsets.

    ``values_X[j, k]`` is the kernel at offset ``(j - (nx-1)) dx`` and
    time ``t_k``.  Column ``k = 0`` holds the ``t -> 0`` limits: the
    discrete Dirac mass ``1/dx`` at offset 0 for ``H`` and zeros for
    ``K_delta`` and ``H_delta``.
    """

    grid: Grid
    values_H: np.ndarray
    values_Kdelta: np.ndarray
    values_Hdelta: np.ndarray
    quad: QuadratureSpec = DEFAULT_QUAD
    form: str = "exact"

    def values(self, name):
        return {"H": self.values_H, "K": self.values_Kdelta,
                "Kdelta": self.values_Kdelta, "Hd": self.values_Hdelta,
                "Hdelta": self.values_Hdelta}[name]

    def mass(self, name):
        """Trapezoid-free sum ``dx * sum_j values[j, k]`` for every ``t_k``."""
        return self.grid.dx * self.values(name).sum(axis=0)


def build_kernel_table(grid, p, quad=DEFAULT_QUAD, form="exact", threads=None):
    """Tabulate ``H``, ``K_delta`` and ``H_delta`` on all grid offsets.

    Only nonnegative offsets are computed; the table is mirrored to
    enforce exact evenness.  Time slices are distributed over a thread
    pool of size :func:`thread_count` (or ``threads``).

    Raises
    ------
    AccuracyError
        Annotated with the failing time.
    """
    nx, nt = grid.nx, grid.nt
    xs = grid.dx * np.arange(nx)
    ts = grid.t
    kinds = ("H", "K", "Hd")
    half = {k: np.zeros((nx, nt)) for k in kinds}
    half["H"][0, 0] = 1.0 / grid.dx

    def work(k):
        try:
            return k, evaluate(kinds, xs, ts[k], p, quad, form)
        except AccuracyError as exc:
            raise AccuracyError(str(exc), exc.estimate, where=f"t={ts[k]:g}") from exc

    n = threads or thread_count()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(work, range(1, nt)))
    else:
        results = [work(k) for k in range(1, nt)]
    for k, vals in results:
        for name in kinds:
            half[name][:, k] = vals[name]
    full = {name: np.concatenate([v[:0:-1], v]) for name, v in half.items()}
    return KernelTable(grid, full["H"], full["K"], full["Hd"], quad, form)
