"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class ResourceLimitError(InvalidInputError):
    """Raised when a request exceeds a hard size guard."""


class NumericalError(RuntimeError):
    """Raised when a computation degrades beyond its stated tolerance."""


class DegenerateInputError(NumericalError):
    """Raised for (near-)singular or rank-deficient input."""


class StallError(NumericalError):
    """Raised when the optimizer cannot make progress.

    The partial optimization trace is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
