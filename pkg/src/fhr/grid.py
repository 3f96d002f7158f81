"""Uniform space-time lattices and fields sampled on them."""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

__all__ = ["Grid", "Field"]


@dataclass(frozen=True)
class Grid:
    """Uniform lattice ``x_min..x_max`` (``nx`` points) x ``0..t_max`` (``nt``).

    Attributes
    ----------
    x_min, x_max : float
        Truncation of the real line.
    nx : int
        Number of space points (at least 3).
    t_max : float
        Final time.
    nt : int
        Number of time points including ``t = 0`` (at least 2).
    """

    x_min: float
    x_max: float
    nx: int
    t_max: float
    nt: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or not self.x_min < self.x_max:
            raise DomainError("grid needs finite x_min < x_max")
        if int(self.nx) != self.nx or self.nx < 3:
            raise DomainError("grid needs nx >= 3")
        if int(self.nt) != self.nt or self.nt < 2:
            raise DomainError("grid needs nt >= 2")
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise DomainError("grid needs t_max > 0")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self):
        return self.t_max / (self.nt - 1)

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def t(self):
        return np.linspace(0.0, self.t_max, self.nt)

    @property
    def offsets(self):
        """Signed space offsets ``k dx`` for ``k = -(nx-1)..(nx-1)``."""
        return self.dx * np.arange(-(self.nx - 1), self.nx)

    def refined(self, factor=2):
        """Grid with the steps divided by ``factor`` over the same box."""
        return Grid(self.x_min, self.x_max, factor * (self.nx - 1) + 1,
                    self.t_max, factor * (self.nt - 1) + 1)


@dataclass(frozen=True)
class Field:
    """A real function sampled on a grid, ``values[i, k] = f(x_i, t_k)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.nt):
            raise ShapeError(f"field shape {v.shape} does not match grid "
                             f"({self.grid.nx}, {self.grid.nt})")
        object.__setattr__(self, "values", v)

    def sup_norm(self, axis=None):
        """``max |f|`` overall, or along ``axis`` (0 gives a per-time profile)."""
        return np.max(np.abs(self.values), axis=axis)

    def __sub__(self, other):
        return Field(self.grid, self.values - other.values)
