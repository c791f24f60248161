"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class SingularityError(InvalidInputError):
    """Raised when a kernel is evaluated on the diagonal."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine exhausts its budget.

    The partial trace is kept on ``history`` so callers can inspect it.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class InvariantViolation(AssertionError):
    """Raised by checks whose numerical invariant failed."""
