"""Exception types shared by all modules."""


class ChiralError(Exception):
    """Base class for library errors."""


class DomainError(ChiralError, ValueError):
    """Argument outside the validated domain of an evaluator."""


class ConvergenceError(ChiralError, ArithmeticError):
    """A series, quadrature or iteration failed to reach its tolerance."""


class SingularMatrixError(ChiralError, ArithmeticError):
    """LU factorisation hit a zero pivot."""


class ConditioningError(ChiralError, ArithmeticError):
    """A matrix is too ill-conditioned for the requested evaluation."""


class ConfigError(ChiralError, ValueError):
    """Invalid or incomplete run configuration."""
