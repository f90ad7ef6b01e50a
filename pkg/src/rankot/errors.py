"""Exception types raised across the package."""


class RankOTError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RankOTError, ValueError):
    """An argument violates a documented precondition."""


class ConvergenceError(RankOTError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    violation : float
        L1 marginal violation achieved when the solver gave up.
    iterations : int
        Iterations performed.
    """

    def __init__(self, message, violation=float("nan"), iterations=0):
        super().__init__(message)
        self.violation = violation
        self.iterations = iterations


class NumericalError(RankOTError, ArithmeticError):
    """A computation produced non-finite values."""
