"""Model constants, their admissible ranges, and the scalar envelope functions.

The three-variable system is

.. math::

    u_t = D u_{xx} - w + y + u(a-u)(u-1), \\quad
    w_t = \\varepsilon(-\\beta w + c + u), \\quad
    y_t = \\delta(-u + h - d y).

Every a priori estimate for the kernels and for the solution is built
from a handful of scalar functions of time (``A, B, C, E, L, lambda, g,
h``) and three constants (``S, M, N``).  They are collected here so that
the kernel, bound and CLI modules share a single implementation.
"""
from dataclasses import dataclass, field, fields, replace
import math

import numpy as np

from .errors import DataError, DegenerateBoundConstant, DomainError, ValidationError

__all__ = [
    "ModelParams",
    "DecayRates",
    "BoundConstants",
    "DEMO_PARAMS",
    "ENVELOPE_NAMES",
    "validate",
    "envelope",
    "bound_constants",
    "lambda_integral",
]

#: Relative threshold below which two decay rates are treated as equal.
RATE_COINCIDENCE = 1e-8


@dataclass(frozen=True)
class DecayRates:
    """Slowest decay rates of the linear dynamics.

    Attributes
    ----------
    l : float
        ``min(a, beta*eps)``.
    q : float
        ``min(a, beta*eps, delta*d)``.
    """

    l: float
    q: float


@dataclass(frozen=True)
class ModelParams:
    """Kinetic constants of the three-variable system.

    Attributes
    ----------
    a : float
        Knee of the cubic nonlinearity, ``0 < a < 1``.
    D : float
        Diffusion coefficient.
    eps, beta : float
        Rate and damping of the slow recovery variable ``w``.
    delta, d : float
        Rate and damping of the super-slow variable ``y``.
    c, h : float
        Constant drives of ``w`` and ``y`` (nonnegative).
    """

    a: float
    D: float
    eps: float
    beta: float
    delta: float
    d: float
    c: float = 0.0
    h: float = 0.0
    rates: DecayRates = field(default=None, compare=False, repr=False)

    @property
    def be(self):
        """Decay rate ``beta*eps`` of the ``w`` memory."""
        return self.beta * self.eps

    @property
    def dd(self):
        """Decay rate ``delta*d`` of the ``y`` memory."""
        return self.delta * self.d

    @property
    def l(self):
        return min(self.a, self.be)

    @property
    def q(self):
        return min(self.a, self.be, self.dd)

    def with_(self, **changes):
        """Return a copy with some constants replaced (rates recomputed)."""
        new = replace(self, rates=None, **changes)
        return replace(new, rates=DecayRates(new.l, new.q))

    def as_dict(self):
        """Constants as a plain ``{name: float}`` mapping."""
        return {f.name: float(getattr(self, f.name))
                for f in fields(self) if f.name != "rates"}


#: Demonstration parameter set used as the configuration default.  These
#: values are a convenient bursting-regime choice, not measured data.
DEMO_PARAMS = ModelParams(a=0.5, D=1.0, eps=0.08, beta=0.8, delta=0.04,
                          d=1.0, c=0.3, h=0.2)


def validate(raw, u0_sup=0.0, w0_sup=0.0, y0_sup=0.0):
    """Check the admissible ranges and attach the decay rates.

    Parameters
    ----------
    raw : ModelParams
        Unchecked constants.
    u0_sup, w0_sup, y0_sup : float
        Sup-norms of the initial data, which must be finite.

    Returns
    -------
    ModelParams
        A copy with :attr:`ModelParams.rates` filled in.

    Raises
    ------
    ValidationError
        Naming the first constant that is out of range.
    DataError
        If a sup-norm is not finite.
    """
    for name in ("a", "D", "eps", "beta", "delta", "d", "c", "h"):
        v = getattr(raw, name)
        if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
            raise ValidationError(name, f"must be a finite real number, got {v!r}")
    if not 0.0 < raw.a < 1.0:
        raise ValidationError("a", f"must satisfy 0 < a < 1, got {raw.a}")
    for name in ("D", "eps", "beta", "delta", "d"):
        if not getattr(raw, name) > 0.0:
            raise ValidationError(name, f"must be positive, got {getattr(raw, name)}")
    for name in ("c", "h"):
        if getattr(raw, name) < 0.0:
            raise ValidationError(name, f"must be nonnegative, got {getattr(raw, name)}")
    for name, v in (("u0", u0_sup), ("w0", w0_sup), ("y0", y0_sup)):
        if not math.isfinite(v):
            raise DataError(f"sup-norm of {name} is not finite")
    return raw.with_()


def _exp_difference(p, r, t):
    """``(e^{-p t} - e^{-r t}) / (r - p)`` with its coincident-rate limit."""
    if abs(r - p) <= RATE_COINCIDENCE * (abs(r) + abs(p)):
        m = 0.5 * (r + p)
        return t * math.exp(-m * t)
    # expm1 keeps the difference accurate when (r - p) t is small.
    return math.exp(-p * t) * -math.expm1(-(r - p) * t) / (r - p)


def _lambda(t, p):
    se, sd = math.sqrt(p.eps), math.sqrt(p.delta)
    return 1.0 + math.pi * t * (se + sd + math.pi * t * math.sqrt(p.eps * p.delta))


def _coincident(r1, r2):
    return abs(r1 - r2) <= RATE_COINCIDENCE * (abs(r1) + abs(r2))


def _scalar_envelope(name, t, p):
    a, be, dd, q = p.a, p.be, p.dd, p.q
    if name == "A":
        return _exp_difference(be, a, t)
    if name == "B":
        return _exp_difference(dd, a, t)
    if name == "C":
        return _exp_difference(dd, be, t)
    if name == "E":
        return _exp_difference(q, dd, t)
    if name == "L":
        return _exp_difference(q, be, t)
    if name == "lambda":
        return _lambda(t, p)
    if name == "g":
        if _coincident(be, dd):
            return math.inf
        return _lambda(t, p) * (_exp_difference(q, dd, t)
                                + _exp_difference(q, be, t)) / abs(be - dd)
    if name == "h":
        if _coincident(be, dd):
            return math.inf
        lam = _lambda(t, p)
        E = _exp_difference(q, dd, t)
        L = _exp_difference(q, be, t)
        return lam / (be - dd) ** 2 * (L + (1.0 + t * (dd - be)) * E)
    raise DomainError(f"unknown envelope {name!r}; expected one of {ENVELOPE_NAMES}")


ENVELOPE_NAMES = ("A", "B", "C", "E", "L", "lambda", "g", "h")


def envelope(name, t, p):
    """Evaluate a named scalar envelope function of time.

    ``A = (e^{-be t} - e^{-a t})/(a - be)``, ``B`` and ``C`` likewise for
    the pairs ``(dd, a)`` and ``(dd, be)``; ``E`` and ``L`` pair the
    slowest rate ``q`` with ``dd`` and ``be``.  ``lambda = 1 + pi t
    (sqrt(eps) + sqrt(delta) + pi t sqrt(delta eps))``,
    ``g = lambda (E + L)/|be - dd|`` and
    ``h = lambda/(be - dd)^2 [L + (1 + t(dd - be)) E]``.

    Coincident rates are replaced by the limit ``t e^{-r t}`` at the
    midpoint rate.  ``g`` and ``h`` have no finite limit when
    ``be == dd`` and evaluate to ``inf`` there.

    Parameters
    ----------
    name : str
        One of :data:`ENVELOPE_NAMES`.
    t : float or array_like
        Nonnegative time(s).
    p : ModelParams

    Returns
    -------
    float or ndarray
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise DomainError("envelope time must be finite and nonnegative")
    if t_arr.ndim == 0:
        return _scalar_envelope(name, float(t_arr), p)
    return np.array([_scalar_envelope(name, float(ti), p)
                     for ti in t_arr.ravel()]).reshape(t_arr.shape)


def lambda_integral(p):
    """Closed form of ``int_0^inf lambda(t) e^{-q t} dt``."""
    q = p.q
    return (1.0 / q + math.pi * (math.sqrt(p.eps) + math.sqrt(p.delta)) / q ** 2
            + 2.0 * math.pi ** 2 * math.sqrt(p.delta * p.eps) / q ** 3)


@dataclass(frozen=True)
class BoundConstants:
    """Time-uniform bound constants.

    ``S`` bounds the time-integrated L1 norm of ``H``; ``M`` that of
    ``K_delta``; ``N`` enters the companion estimate for ``H_delta``.
    """

    S: float
    M: float
    N: float


def _S(p):
    a, be, dd, l = p.a, p.be, p.dd, p.l
    se, sd = math.sqrt(p.eps), math.sqrt(p.delta)
    return (1.0 / a
            + se * math.pi * (a + be) / (2.0 * (a * be) ** 1.5)
            + sd * math.pi * ((dd + a) / (a * dd) ** 1.5
                              + 3.0 * math.pi * se * (dd ** 2 + l ** 2) / (4.0 * (l * dd) ** 2.5)))


def _M(p):
    q, dd = p.q, p.dd
    if _coincident(dd, q):
        raise DegenerateBoundConstant("M", "|delta*d - q|")
    se, sd = math.sqrt(p.eps), math.sqrt(p.delta)
    bracket = (q + dd + math.pi * (se + sd) * (q ** 2 + dd ** 2) / (dd * q)
               + 2.0 * math.pi ** 2 * math.sqrt(p.delta * p.eps) * (q ** 3 + dd ** 3) / (q * dd) ** 2)
    return bracket / (abs(dd - q) * p.delta * q * p.d)


def _N(p):
    q, be = p.q, p.be
    if _coincident(be, q):
        raise DegenerateBoundConstant("N", "|beta*eps - q|")
    se, sd = math.sqrt(p.eps), math.sqrt(p.delta)
    # The last denominator pairs beta with d (not eps); kept as stated.
    bracket = (q + be + math.pi * (se + sd) * (q ** 2 + be ** 2) / (be * q)
               + 2.0 * math.pi ** 2 * math.sqrt(p.delta * p.eps) * (q ** 3 + be ** 3) / (q * p.beta * p.d) ** 2)
    return bracket / (abs(be - q) * q * be)


def bound_constants(p, which=("S", "M", "N")):
    """Evaluate the bound constants ``S``, ``M`` and ``N``.

    Parameters
    ----------
    p : ModelParams
    which : iterable of str, optional
        Subset to evaluate; omitted ones are returned as ``nan``.

    Returns
    -------
    BoundConstants

    Raises
    ------
    DegenerateBoundConstant
        If ``M`` is requested while ``q == delta*d`` or ``N`` while
        ``q == beta*eps``.
    """
    funcs = {"S": _S, "M": _M, "N": _N}
    vals = {k: (funcs[k](p) if k in which else math.nan) for k in funcs}
    return BoundConstants(**vals)
