"""Exception hierarchy shared by every module of the package.

The command-line front end maps these onto exit codes, so each class
belongs to exactly one of the categories *input error*, *accuracy /
non-convergence* or *degenerate constant*.
"""


class FHRError(Exception):
    """Base class for all package errors."""


class DomainError(FHRError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(DomainError):
    """An argument would overflow the floating-point range."""


class ValidationError(FHRError, ValueError):
    """A model constant violates its admissible range.

    Attributes
    ----------
    name : str
        Name of the offending constant.
    """

    def __init__(self, name, message):
        super().__init__(f"{name}: {message}")
        self.name = name


class DataError(FHRError, ValueError):
    """Initial data are not finite or not bounded."""


class ShapeError(FHRError, ValueError):
    """Arrays that must share a grid have incompatible shapes."""


class ConfigError(FHRError, ValueError):
    """A configuration file or option is malformed or inconsistent."""


class AccuracyError(FHRError, RuntimeError):
    """Adaptive quadrature failed to reach its tolerance.

    Attributes
    ----------
    estimate : float
        Largest achieved error estimate.
    where : str
        Free-text location of the failure (filled in by callers).
    """

    def __init__(self, message, estimate=float("nan"), where=""):
        super().__init__(message + (f" at {where}" if where else ""))
        self.estimate = estimate
        self.where = where


class TruncationError(FHRError, RuntimeError):
    """Mass lost through the truncated spatial domain is too large."""


class NonConvergenceError(FHRError, RuntimeError):
    """An iteration hit its iteration cap before meeting its tolerance.

    Attributes
    ----------
    history : list of float
        Update norms of every completed iteration.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DivergenceError(NonConvergenceError):
    """An iterate or time step produced non-finite or runaway values."""


class DegenerateBoundConstant(FHRError, ArithmeticError):
    """A bound constant has a vanishing denominator for these rates.

    Attributes
    ----------
    constant : str
        Name of the constant (``"M"`` or ``"N"``).
    denominator : str
        Human-readable form of the vanishing denominator.
    """

    def __init__(self, constant, denominator):
        super().__init__(
            f"{constant} is undefined: denominator {denominator} vanishes")
        self.constant = constant
        self.denominator = denominator
