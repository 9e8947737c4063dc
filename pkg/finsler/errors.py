class FinslerError(Exception):
    """Base class for every error raised by the finsler package."""


class ConfigurationError(FinslerError, ValueError):
    pass


class InvalidParameterError(FinslerError, ValueError):
    pass


class DomainError(FinslerError, ValueError):
    """Point outside the chart, vanishing y, or a non-finite evaluation."""


class OrderOverflowError(FinslerError):
    pass


class DepthExceededError(OrderOverflowError):
    pass


class SingularMetricError(FinslerError, ArithmeticError):
    pass


class NonConvergenceError(FinslerError, ArithmeticError):
    pass


class DegenerateFlagError(FinslerError, ValueError):
    pass


class CriticalPointError(FinslerError, ArithmeticError):
    pass


class ChartExitError(FinslerError):
    pass


class StepFailureError(FinslerError, ArithmeticError):
    pass


class ExpressionError(FinslerError, ValueError):
    pass
