"""Exception types raised across the package."""


class GameInverseError(Exception):
    """Base class for all package errors."""


class MalformedSessionError(GameInverseError, ValueError):
    pass


class HiddenCellError(GameInverseError, LookupError):
    """Raised when the hidden utility of a masked game is read."""


class UnsupportedShapeError(GameInverseError, ValueError):
    pass


class NoMixedEquilibriumError(GameInverseError, ArithmeticError):
    pass


class IndeterminateEquilibriumError(GameInverseError, ArithmeticError):
    pass


class NoInteriorBalanceError(GameInverseError, ArithmeticError):
    pass


class NonConvergenceError(GameInverseError, RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3g})")
        self.best_residual = best_residual


class UninformativeDataError(GameInverseError, ArithmeticError):
    """The observed play carries no information about the hidden utility.

    ``reason`` is a short machine-readable code used by the evaluation
    harness when it records a missing estimate.
    """

    def __init__(self, message: str, reason: str = "uninformative"):
        super().__init__(message)
        self.reason = reason


class EmptyTaskError(GameInverseError, ValueError):
    pass


class UndefinedMetricsError(GameInverseError, ValueError):
    pass


class InsufficientDataError(GameInverseError, ValueError):
    pass


class ParseError(GameInverseError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
