"""Averages of (inverse) characteristic polynomials, their ratios and the
correlation kernel for the L-deformed chiral Gaussian ensemble with an
external source, plus determinantal and Monte Carlo cross-checks and the
large-N Bessel limits."""

from .errors import (
    ChiralError,
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DomainError,
    SingularMatrixError,
)
from .exact import (
    Degenerate,
    Distinct,
    EnsembleParams,
    EvalResult,
    cp,
    d_function,
    g_function,
    inverse_cp,
    kernel,
    ratio_cp,
)

__version__ = "0.1.0"

__all__ = [
    "ChiralError",
    "ConditioningError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "SingularMatrixError",
    "Degenerate",
    "Distinct",
    "EnsembleParams",
    "EvalResult",
    "cp",
    "d_function",
    "g_function",
    "inverse_cp",
    "kernel",
    "ratio_cp",
]
