"""Convolution algebra: time ``*``, space ``<>`` and space-time ``(x)``.

Notation used throughout::

    (f * g)(t)        = int_0^t f(t - s) g(s) ds
    (g1 <> g2)(x)     = int_R g1(xi) g2(x - xi) dxi
    (K (x) F)(x, t)   = int_0^t ds int_R K(x - xi, t - s) F(xi, s) dxi

All three are discretised with the trapezoidal rule on uniform grids.
Kernel rows are stored on the symmetric offsets ``-(n-1)..(n-1)`` of a
data axis with ``n`` points (see :class:`fhr.kernel.KernelTable`).

Fields that do not decay at the edges of the truncated domain (constant
drives produce such fields) are handled by ``far_field="constant"``,
which extends the data by its boundary values; the exterior part of the
kernel mass is then added exactly.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.signal import fftconvolve

from .errors import ShapeError, TruncationError
from .grid import Field, Grid
from .kernel import DEFAULT_QUAD, evaluate, _check_t
from .quadrature import integrate

__all__ = [
    "Grid",
    "Field",
    "eval_K_delta",
    "eval_H_delta",
    "conv_time",
    "conv_space",
    "space_conv_columns",
    "conv_spacetime",
    "IdentityReport",
    "IDENTITY_GRID",
    "check_identities",
]

FAR_FIELDS = ("zero", "constant")


def eval_K_delta(x, t, p, quad=DEFAULT_QUAD, form="exact"):
    """Kernel ``K_delta = e^{-delta d t} * H``.

    With ``form="printed"`` it is evaluated as
    ``int_0^t e^{-delta d (t-y)} H1(x, y) J0(2 sqrt(delta y (t-y))) dy``.

    Parameters
    ----------
    x : float or array_like
    t : float or array_like
        Strictly positive.
    p : ModelParams
    quad : QuadratureSpec, optional
    form : {"exact", "printed"}

    Returns
    -------
    float or ndarray
    """
    return evaluate(("K",), x, t, p, quad, form)["K"]


def eval_H_delta(x, t, p, quad=DEFAULT_QUAD, form="exact"):
    """Kernel ``H_delta = e^{-beta eps t} * K_delta`` by outer quadrature.

    The time convolution is integrated adaptively with the substitution
    ``s = t w^2``; each node evaluates ``K_delta`` directly.

    Returns
    -------
    float or ndarray
    """
    _check_t(t)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    xf, tf = x.ravel(), t.ravel()

    def f(w):
        s = tf[:, None] * w * w
        K = eval_K_delta(xf[:, None], s, p, quad, form)
        return 2.0 * tf[:, None] * w * np.exp(-p.be * (tf[:, None] - s)) * K

    vals, _ = integrate(f, 0.0, 1.0, breakpoints=np.linspace(0, 1, 5)[1:-1], **quad.options())
    return vals.reshape(shape)[()]


def conv_time(f, g, dt):
    """Causal time convolution by the trapezoidal rule.

    Parameters
    ----------
    f, g : array_like
        Signals sampled at ``t_k = k dt`` along their last axis; leading
        axes broadcast.
    dt : float
        Time step.

    Returns
    -------
    ndarray
        ``(f * g)(t_k)`` for every ``k``; exact for linear ``f g``.

    Raises
    ------
    ShapeError
        If the time axes differ in length.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[-1] != g.shape[-1]:
        raise ShapeError(f"time axes differ: {f.shape[-1]} vs {g.shape[-1]}")
    n = f.shape[-1]
    shape = np.broadcast_shapes(f.shape, g.shape)
    out = np.zeros(shape)
    for j in range(n):
        out[..., j:] += g[..., j:j + 1] * f[..., :n - j]
    # Trapezoid: halve the two endpoint contributions.
    out -= 0.5 * (f * g[..., :1] + f[..., :1] * g)
    out[..., 0] = 0.0
    return out * dt


def _exterior_mass(kernel, n):
    """Kernel mass lying left / right of the data window, per output point.

    ``kernel`` has ``2n - 1`` rows (offsets ``-(n-1)..(n-1)``) and any
    number of columns.  Returns arrays of shape ``(n,) + kernel.shape[1:]``
    with ``left[i] = sum_{o > i} K[o]`` and ``right[i] = sum_{o < i-(n-1)} K[o]``
    (offsets ``o``), i.e. the weight that data beyond ``x_0`` or
    ``x_{n-1}`` would receive at ``x_i``.
    """
    c = np.cumsum(kernel, axis=0)
    total = c[-1]
    zero = np.zeros((1,) + kernel.shape[1:])
    c = np.concatenate([zero, c])  # c[m] = sum of rows < m
    i = np.arange(n)
    # offset o corresponds to row o + n - 1.
    left = total - c[i + n]        # rows > i + n - 1
    right = c[i]                   # rows < i
    return left, right


def space_conv_columns(kernel, data, dx, far_field="zero"):
    """Space convolution of one data row with every kernel column.

    Parameters
    ----------
    kernel : ndarray, shape (2n-1, m)
        Kernel columns on symmetric offsets.
    data : ndarray, shape (n,)
    dx : float
    far_field : {"zero", "constant"}

    Returns
    -------
    ndarray, shape (n, m)
    """
    kernel = np.asarray(kernel, dtype=float)
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if kernel.ndim == 1:
        kernel = kernel[:, None]
    if kernel.shape[0] != 2 * n - 1:
        raise ShapeError(f"kernel needs {2 * n - 1} offsets, got {kernel.shape[0]}")
    full = fftconvolve(kernel, data[:, None], axes=0)
    out = full[n - 1:2 * n - 1] * dx
    if far_field == "constant":
        left, right = _exterior_mass(kernel, n)
        out = out + dx * (data[0] * left + data[-1] * right)
    elif far_field != "zero":
        raise ValueError(f"far_field must be one of {FAR_FIELDS}")
    return out


def conv_space(data, kernel_row, dx, *, far_field="zero", tol=1e-10, strict=True):
    """Space convolution ``(kernel <> data)(x_i)`` on the truncated grid.

    Parameters
    ----------
    data : array_like, shape (n,)
        Samples on a uniform grid with step ``dx``.
    kernel_row : array_like, shape (2n-1,)
        Kernel on the offsets ``-(n-1) dx .. (n-1) dx``.
    dx : float
    far_field : {"zero", "constant"}
        How data are continued outside the window.
    tol : float
        Per-entry tolerance on the truncation-tail estimate (zero far
        field only).
    strict : bool
        Raise :class:`TruncationError` when the tail estimate exceeds
        ``100 tol`` anywhere.

    Returns
    -------
    values : ndarray, shape (n,)
    flagged : ndarray of bool, shape (n,)
        Entries whose tail estimate exceeds ``tol``.
    """
    data = np.asarray(data, dtype=float)
    row = np.asarray(kernel_row, dtype=float)
    n = data.shape[0]
    if row.shape != (2 * n - 1,):
        raise ShapeError(f"kernel row needs {2 * n - 1} offsets, got {row.shape}")
    values = space_conv_columns(row, data, dx, far_field)[:, 0]
    if far_field == "constant":
        return values, np.zeros(n, dtype=bool)
    left, right = _exterior_mass(np.abs(row)[:, None], n)
    tail = dx * (abs(data[0]) * left[:, 0] + abs(data[-1]) * right[:, 0])
    if strict and np.max(tail) > 100.0 * tol:
        raise TruncationError(
            f"truncation tail {np.max(tail):.3g} exceeds 100 x tol; enlarge x_max")
    return values, tail > tol


def conv_spacetime(kernel, F, dx, dt, far_field="constant"):
    """Space-time convolution ``K (x) F`` with trapezoidal weights.

    Parameters
    ----------
    kernel : ndarray, shape (2n-1, nt)
        Kernel table (for ``H`` the lag-0 column is the discrete Dirac
        mass, so the ``s = t`` layer reproduces ``F(x, t)`` itself).
    F : ndarray or Field, shape (n, nt)
    dx, dt : float
    far_field : {"zero", "constant"}

    Returns
    -------
    ndarray, shape (n, nt)
    """
    grid = None
    if isinstance(F, Field):
        grid, F = F.grid, F.values
    K = np.asarray(kernel, dtype=float)
    F = np.asarray(F, dtype=float)
    n, nt = F.shape
    if K.shape != (2 * n - 1, nt):
        raise ShapeError(f"kernel shape {K.shape} incompatible with field {F.shape}")
    full = fftconvolve(K, F)[n - 1:2 * n - 1, :nt]
    # Endpoint layers s = 0 and s = t carry half weight.
    first = space_conv_columns(K, F[:, 0], 1.0)                  # K(t_k) <> F(0)
    last = fftconvolve(F, K[:, :1], axes=0)[n - 1:2 * n - 1]      # K(0) <> F(t_k)
    out = full - 0.5 * (first + last)
    out[:, 0] = 0.0
    out *= dx * dt
    if far_field == "constant":
        left, right = _exterior_mass(K, n)
        out += dx * (conv_time(left, F[:1, :], dt) + conv_time(right, F[-1:, :], dt))
    elif far_field != "zero":
        raise ValueError(f"far_field must be one of {FAR_FIELDS}")
    return Field(grid, out) if grid is not None else out


# --------------------------------------------------------------------------
# Identities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityReport:
    """Sup-norm residuals of the kernel identities on a grid.

    Attributes
    ----------
    grid : Grid
    residuals : dict
        ``"K"``: ``e^{-dd t} * H - K_delta``;
        ``"eK"``: ``e^{-be t} * H - [K_delta + (dd - be) e^{-be t} * K_delta]``;
        ``"Hd"``: ``e^{-be t} * H - [K_delta + (dd - be) H_delta]``;
        ``"shift"``: ``(t e^{-dd t}) * H - e^{-dd t} * K_delta``.
    skipped_x : ndarray
        Grid positions excluded because ``|x|`` is below the cutoff.
    """

    grid: Grid
    residuals: dict
    skipped_x: np.ndarray

    def worst(self):
        k = max(self.residuals, key=self.residuals.get)
        return k, self.residuals[k]


#: Default grid for identity checks: away from x = 0, where H(0, t) ~
#: t^{-1/2} is not resolved by the trapezoidal time rule.
IDENTITY_GRID = Grid(1.0, 5.0, 9, 2.0, 201)
X_CUTOFF = 0.5


def check_identities(grid=IDENTITY_GRID, p=None, quad=DEFAULT_QUAD, form="exact"):
    """Residuals of the convolution identities linking ``H``, ``K_delta``, ``H_delta``.

    Kernels are evaluated directly at every grid point with ``|x| >=
    0.5``; time convolutions use :func:`conv_time`, so the residuals
    measure the second-order discretisation error.

    Returns
    -------
    IdentityReport
    """
    x = grid.x
    keep = np.abs(x) >= X_CUTOFF
    xs = x[keep]
    t = grid.t
    dt = grid.dt
    vals = evaluate(("H", "K", "Hd"), xs[:, None], t[None, 1:], p, quad, form)
    pad = lambda a: np.concatenate([np.zeros((len(xs), 1)), a], axis=1)
    H, Kd, Hd = (pad(vals[k]) for k in ("H", "K", "Hd"))
    e_dd = np.exp(-p.dd * t)
    e_be = np.exp(-p.be * t)
    gap = p.dd - p.be
    eH_dd = conv_time(e_dd, H, dt)
    eH_be = conv_time(e_be, H, dt)
    res = {
        "K": np.max(np.abs(eH_dd - Kd)),
        "eK": np.max(np.abs(eH_be - (Kd + gap * conv_time(e_be, Kd, dt)))),
        "Hd": np.max(np.abs(eH_be - (Kd + gap * Hd))),
        "shift": np.max(np.abs(conv_time(t * e_dd, H, dt) - conv_time(e_dd, Kd, dt))),
    }
    return IdentityReport(grid, {k: float(v) for k, v in res.items()}, x[~keep])
