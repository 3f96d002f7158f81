"""Fundamental solution, convolution representation and a priori
estimates for the FitzHugh–Rinzel reaction–diffusion system.

Modules
-------
specfun
    Bessel functions ``J0, J1, I0, I1``.
params
    Model constants, decay rates, envelope functions, bound constants.
kernel
    The fundamental solution ``H`` and its verification oracles.
convolution
    Derived kernels ``K_delta``, ``H_delta`` and discrete convolutions.
solver
    Picard, finite-difference and ODE solvers for the full system.
bounds
    Envelopes of every estimate and the run checker.
cli
    The ``fhr`` command-line front end.
"""
from .errors import (AccuracyError, ConfigError, DataError, DegenerateBoundConstant,
                     DivergenceError, DomainError, FHRError, NonConvergenceError,
                     RangeError, ShapeError, TruncationError, ValidationError)
from .grid import Field, Grid
from .params import DEMO_PARAMS, ModelParams, bound_constants, envelope, validate

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AccuracyError",
    "ConfigError",
    "DataError",
    "DegenerateBoundConstant",
    "DivergenceError",
    "DomainError",
    "FHRError",
    "NonConvergenceError",
    "RangeError",
    "ShapeError",
    "TruncationError",
    "ValidationError",
    "Field",
    "Grid",
    "DEMO_PARAMS",
    "ModelParams",
    "bound_constants",
    "envelope",
    "validate",
]
