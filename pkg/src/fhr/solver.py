"""Solution of the full nonlinear system.

Primary route
    Picard iteration on ``u = H <> u0 + H (x) F(u)``, where the source

    ``F = phi(u) - w0 e^{-be t} + y0 e^{-dd t} - (c/beta)(1 - e^{-be t})
    + (h/d)(1 - e^{-dd t})``

    collects the nonlinearity ``phi(u) = u^2 (a + 1 - u)`` and the
    contributions of the initial data and drives of ``w`` and ``y``.
    ``w`` and ``y`` are then recovered from ``u`` by exponential
    integrals.

Cross-checks
    * the fully expanded convolution representation of ``u``, ``w``
      and ``y`` in terms of ``H``, ``K_delta`` and ``H_delta``;
    * an independent method-of-lines finite-difference solver;
    * an ODE solver for spatially constant data.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp

from .convolution import conv_spacetime, conv_time, space_conv_columns
from .errors import ConfigError, DataError, DivergenceError, NonConvergenceError, ShapeError
from .grid import Field, Grid

__all__ = [
    "InitialData",
    "PicardSpec",
    "SolutionField",
    "FDMOptions",
    "phi",
    "phi_prime",
    "phi_sup",
    "source_F",
    "picard_solve",
    "recover_wy",
    "representation_318",
    "representation_slow",
    "fdm_solve",
    "homogeneous_ode",
    "initial_profile",
]

GENERATORS = ("gaussian", "constant", "zero")


def initial_profile(x, kind="zero", center=0.0, width=1.0, amplitude=0.0, value=0.0):
    """Sample a named initial profile.

    ``gaussian``: ``amplitude exp(-(x - center)^2 / (2 width^2))``;
    ``constant``: ``value``; ``zero``: 0.
    """
    x = np.asarray(x, dtype=float)
    if kind == "gaussian":
        if not width > 0:
            raise DataError("gaussian width must be positive")
        return amplitude * np.exp(-((x - center) ** 2) / (2.0 * width ** 2))
    if kind == "constant":
        return np.full_like(x, float(value))
    if kind == "zero":
        return np.zeros_like(x)
    raise DataError(f"unknown initial profile {kind!r}; expected one of {GENERATORS}")


@dataclass(frozen=True)
class InitialData:
    """Initial values of ``(u, w, y)`` sampled on the space axis."""

    u0: np.ndarray
    w0: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("u0", "w0", "y0")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ShapeError("u0, w0, y0 must be 1-D arrays of equal length")
        for name, a in zip(("u0", "w0", "y0"), arrs):
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} is not finite")
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, grid):
        z = np.zeros(grid.nx)
        return cls(z, z.copy(), z.copy())

    def sups(self):
        """Sup-norms ``(|u0|, |w0|, |y0|)``."""
        return tuple(float(np.max(np.abs(a))) for a in (self.u0, self.w0, self.y0))


@dataclass(frozen=True)
class PicardSpec:
    """Stopping rule: sup-norm update ``<= tol`` within ``max_iter`` sweeps."""

    tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("Picard tolerance must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")


@dataclass(frozen=True)
class SolutionField:
    """Sampled solution triple with run diagnostics.

    Attributes
    ----------
    grid : Grid
    u, w, y : Field
    iterations_used : int
    final_update_norm : float
    update_history : tuple of float
        Sup-norm of every Picard update (empty for other methods).
    lipschitz : float
        ``max |phi'(u)|`` over the range of the final iterate.
    phi_norm : float
        ``sup |phi|`` over the realised ``u`` range, inflated by 10%.
    method : str
    """

    grid: Grid
    u: Field
    w: Field
    y: Field
    iterations_used: int = 0
    final_update_norm: float = 0.0
    update_history: tuple = ()
    lipschitz: float = 0.0
    phi_norm: float = 0.0
    method: str = "picard"


def phi(u, p):
    """Nonlinear part of the kinetics, ``u^2 (a + 1 - u)``."""
    u = np.asarray(u, dtype=float)
    return (u * u * (p.a + 1.0 - u))[()]


def phi_prime(u, p):
    """Derivative ``2 (a + 1) u - 3 u^2``."""
    u = np.asarray(u, dtype=float)
    return (2.0 * (p.a + 1.0) * u - 3.0 * u * u)[()]


def phi_sup(u_min, u_max, p, inflate=0.1):
    """``(1 + inflate) max |phi|`` over ``[u_min, u_max]``.

    The maximum is attained at an endpoint or at a critical point
    ``0`` or ``2(a+1)/3`` inside the interval.
    """
    cand = [u_min, u_max] + [c for c in (0.0, 2.0 * (p.a + 1.0) / 3.0) if u_min <= c <= u_max]
    return (1.0 + inflate) * float(np.max(np.abs(phi(np.array(cand), p))))


def source_F(x_index, t, u, data, p):
    """Source of the reduced problem at grid position(s) ``x_index``.

    Parameters
    ----------
    x_index : int, slice or index array
        Space index into the initial data.
    t : float or array_like
        Times (broadcast against ``x_index`` as ``data.u0[x_index][:, None]``
        when both are arrays).
    u : float or array_like
        Value(s) of ``u``.
    data : InitialData
    p : ModelParams
    """
    t = np.asarray(t, dtype=float)
    w0 = np.asarray(data.w0[x_index], dtype=float)
    y0 = np.asarray(data.y0[x_index], dtype=float)
    if w0.ndim and t.ndim:
        w0, y0 = w0[:, None], y0[:, None]
    e_be = np.exp(-p.be * t)
    e_dd = np.exp(-p.dd * t)
    return (phi(u, p) - w0 * e_be + y0 * e_dd
            - (p.c / p.beta) * (1.0 - e_be) + (p.h / p.d) * (1.0 - e_dd))[()]


def _check_grid(data, grid, table=None):
    if data.u0.shape != (grid.nx,):
        raise ShapeError(f"initial data have {data.u0.shape[0]} points, grid has {grid.nx}")
    if table is not None and table.grid != grid:
        raise ShapeError("kernel table was built on a different grid")


def picard_solve(data, grid, p, table, spec=PicardSpec(), far_field="constant"):
    """Solve for ``(u, w, y)`` by Picard iteration.

    Iterates ``u_{n+1} = H <> u0 + H (x) F(u_n)`` from ``u_0 = H <> u0``
    until ``sup |u_{n+1} - u_n| <= spec.tol``, then recovers ``w`` and
    ``y`` with :func:`recover_wy`.

    Parameters
    ----------
    data : InitialData
    grid : Grid
    p : ModelParams
    table : KernelTable
        Built on ``grid``.
    spec : PicardSpec
    far_field : {"constant", "zero"}
        Continuation of data beyond the truncated domain.

    Returns
    -------
    SolutionField

    Raises
    ------
    NonConvergenceError
        If ``spec.max_iter`` sweeps do not reach ``spec.tol``; carries
        the update history.
    DivergenceError
        If an iterate becomes non-finite.
    """
    _check_grid(data, grid, table)
    dx, dt = grid.dx, grid.dt
    t = grid.t
    affine = space_conv_columns(table.values_H, data.u0, dx, far_field)
    u = affine
    history = []
    for it in range(1, spec.max_iter + 1):
        F = source_F(slice(None), t, u, data, p)
        u_new = affine + conv_spacetime(table.values_H, F, dx, dt, far_field)
        if not np.all(np.isfinite(u_new)):
            raise DivergenceError(f"non-finite Picard iterate at sweep {it}", history)
        upd = float(np.max(np.abs(u_new - u)))
        history.append(upd)
        u = u_new
        if upd <= spec.tol:
            break
    else:
        raise NonConvergenceError(
            f"Picard iteration did not reach tol={spec.tol:g} in {spec.max_iter} sweeps "
            f"(last update {history[-1]:.3g})", history)
    uf = Field(grid, u)
    w, y = recover_wy(uf, data, p)
    lip = float(np.max(np.abs(phi_prime(np.array([u.min(), u.max()]), p))))
    lip = max(lip, float(np.max(np.abs(phi_prime(u, p)))))
    return SolutionField(grid, uf, w, y, it, history[-1], tuple(history), lip,
                         phi_sup(float(u.min()), float(u.max()), p), "picard")


def recover_wy(u, data, p):
    """Slow variables from ``u`` by exponential time integrals.

    ``w = w0 e^{-be t} + (c/beta)(1 - e^{-be t}) + eps e^{-be t} * u``,
    ``y = y0 e^{-dd t} + (h/d)(1 - e^{-dd t}) - delta e^{-dd t} * u``,
    with ``*`` discretised by :func:`conv_time`.

    Returns
    -------
    (Field, Field)
    """
    grid = u.grid
    t = grid.t
    e_be = np.exp(-p.be * t)
    e_dd = np.exp(-p.dd * t)
    w = (data.w0[:, None] * e_be + (p.c / p.beta) * (1.0 - e_be)
         + p.eps * conv_time(e_be, u.values, grid.dt))
    y = (data.y0[:, None] * e_dd + (p.h / p.d) * (1.0 - e_dd)
         - p.delta * conv_time(e_dd, u.values, grid.dt))
    return Field(grid, w), Field(grid, y)


def _kernel_time_conv(table, name, rate):
    """``e^{-rate t} * kernel`` along the time axis of a table."""
    g = table.grid
    return conv_time(np.exp(-rate * g.t), table.values(name), g.dt)


def representation_318(data, grid, p, table, u):
    """Reassemble ``u`` from the expanded convolution representation.

    ``u = H <> u0 + K <> (y0 - w0) + H (x) phi(u) + (be - dd) Hd <> w0
    + (c/beta)(dd - be) (Hd <> 1) + (h/d - c/beta)(H (x) 1)
    + (c/beta - h/d)(K <> 1)``.

    Parameters
    ----------
    u : Field
        Converged ``u`` (enters only through ``phi(u)``).

    Returns
    -------
    Field
    """
    _check_grid(data, grid, table)
    dx, dt = grid.dx, grid.dt
    cb, hd = p.c / p.beta, p.h / p.d
    gap = p.dd - p.be
    conv = lambda name, f: space_conv_columns(table.values(name), f, dx, "constant")
    ones = np.ones(grid.nx)
    out = (conv("H", data.u0) + conv("K", data.y0 - data.w0)
           + conv_spacetime(table.values_H, phi(u.values, p), dx, dt)
           - gap * conv("Hd", data.w0)
           + cb * gap * conv("Hd", ones)
           + (hd - cb) * conv_spacetime(table.values_H, np.ones((grid.nx, grid.nt)), dx, dt)
           + (cb - hd) * conv("K", ones))
    return Field(grid, out)


def representation_slow(data, grid, p, table, u):
    """Reassemble ``w`` and ``y`` from the expanded convolution representation.

    With ``gap = dd - be`` and ``G = phi(u) + h/d - c/beta``::

        e^{-be t} * u = K <> u0 + (K + gap Hd) (x) G
                        + gap (e^{-be t} * Hd) <> (c/beta - w0)
                        + Hd <> (y0 - w0 - h/d + c/beta + gap u0)
        e^{-dd t} * u = K <> u0 + K (x) G
                        + (e^{-dd t} * K) <> (y0 - w0 - h/d + c/beta)
                        + gap (e^{-dd t} * Hd) <> (c/beta - w0)

    and ``w``, ``y`` follow from the exponential-integral formulas.

    Returns
    -------
    (Field, Field)
    """
    _check_grid(data, grid, table)
    dx, dt = grid.dx, grid.dt
    t = grid.t
    cb, hd = p.c / p.beta, p.h / p.d
    gap = p.dd - p.be
    Kt, Hdt = table.values_Kdelta, table.values_Hdelta
    conv = lambda kern, f: space_conv_columns(kern, f, dx, "constant")
    G = phi(u.values, p) + hd - cb
    KH = Kt + gap * Hdt
    e_be_u = (conv(Kt, data.u0) + conv_spacetime(KH, G, dx, dt)
              + gap * conv(_kernel_time_conv(table, "Hd", p.be), cb - data.w0)
              + conv(Hdt, data.y0 - data.w0 - hd + cb + gap * data.u0))
    e_dd_u = (conv(Kt, data.u0) + conv_spacetime(Kt, G, dx, dt)
              + conv(_kernel_time_conv(table, "K", p.dd), data.y0 - data.w0 - hd + cb)
              + gap * conv(_kernel_time_conv(table, "Hd", p.dd), cb - data.w0))
    e_be = np.exp(-p.be * t)
    e_dd = np.exp(-p.dd * t)
    w = data.w0[:, None] * e_be + cb * (1.0 - e_be) + p.eps * e_be_u
    y = data.y0[:, None] * e_dd + hd * (1.0 - e_dd) - p.delta * e_dd_u
    return Field(grid, w), Field(grid, y)


@dataclass(frozen=True)
class FDMOptions:
    """Options of the finite-difference oracle.

    Attributes
    ----------
    dt : float, optional
        Internal time step; defaults to the largest stable step that
        divides the output step.
    safety : float
        Fraction of the explicit diffusion limit ``dx^2/(2D)``.
    blowup : float
        Divergence threshold on ``|u|``.
    """

    dt: float = None
    safety: float = 0.9
    blowup: float = 1e3


def _fdm_rhs(p, dx2):
    def rhs(u, w, y):
        lap = np.empty_like(u)
        lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        # Zero-flux boundaries through mirrored ghost points.
        lap[0] = 2.0 * (u[1] - u[0])
        lap[-1] = 2.0 * (u[-2] - u[-1])
        du = p.D * lap / dx2 - w + y + u * (p.a - u) * (u - 1.0)
        dw = p.eps * (-p.beta * w + p.c + u)
        dy = p.delta * (-u + p.h - p.d * y)
        return du, dw, dy
    return rhs


def fdm_solve(data, grid, p, options=FDMOptions()):
    """Method-of-lines finite differences with classical RK4 in time.

    Second-order central differences, zero-flux boundaries, and the
    cubic kinetics ``u (a - u)(u - 1)`` of the original system.

    Raises
    ------
    ConfigError
        If ``options.dt`` exceeds ``safety dx^2 / (2D)``.
    DivergenceError
        If ``|u|`` exceeds ``options.blowup``.
    """
    _check_grid(data, grid)
    limit = options.safety * grid.dx ** 2 / (2.0 * p.D)
    if options.dt is not None:
        if options.dt > limit:
            raise ConfigError(f"time step {options.dt:g} violates the stability limit {limit:g}")
        h_max = options.dt
    else:
        h_max = limit
    sub = max(1, int(math.ceil(grid.dt / h_max - 1e-12)))
    h = grid.dt / sub
    rhs = _fdm_rhs(p, grid.dx ** 2)
    u, w, y = data.u0.copy(), data.w0.copy(), data.y0.copy()
    U = np.empty((grid.nx, grid.nt))
    W = np.empty_like(U)
    Y = np.empty_like(U)
    U[:, 0], W[:, 0], Y[:, 0] = u, w, y
    for k in range(1, grid.nt):
        for _ in range(sub):
            k1 = rhs(u, w, y)
            k2 = rhs(u + 0.5 * h * k1[0], w + 0.5 * h * k1[1], y + 0.5 * h * k1[2])
            k3 = rhs(u + 0.5 * h * k2[0], w + 0.5 * h * k2[1], y + 0.5 * h * k2[2])
            k4 = rhs(u + h * k3[0], w + h * k3[1], y + h * k3[2])
            u = u + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w = w + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            y = y + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > options.blowup:
            raise DivergenceError(f"finite-difference solution blew up at t={grid.t[k]:g}")
        U[:, k], W[:, k], Y[:, k] = u, w, y
    return SolutionField(grid, Field(grid, U), Field(grid, W), Field(grid, Y),
                         iterations_used=grid.nt - 1,
                         phi_norm=phi_sup(float(U.min()), float(U.max()), p),
                         method="fdm")


def homogeneous_ode(u0, w0, y0, t, p, rtol=1e-11, atol=1e-13):
    """Solve the diffusion-free system for spatially constant data.

    Returns
    -------
    (ndarray, ndarray, ndarray)
        ``u, w, y`` at the times ``t`` (ascending, starting at 0).
    """
    t = np.asarray(t, dtype=float)

    def rhs(_, z):
        u, w, y = z
        return [-w + y + u * (p.a - u) * (u - 1.0),
                p.eps * (-p.beta * w + p.c + u),
                p.delta * (-u + p.h - p.d * y)]

    sol = solve_ivp(rhs, (float(t[0]), float(t[-1])), [u0, w0, y0], method="DOP853",
                    t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise NonConvergenceError(f"ODE oracle failed: {sol.message}")
    return sol.y[0], sol.y[1], sol.y[2]
