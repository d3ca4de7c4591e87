"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined or supported."""


class UnsupportedError(DomainError):
    """Request is well-defined mathematically but outside what is implemented."""


class ConvergenceError(RuntimeError):
    """An iterative or adaptive procedure stopped before reaching its tolerance.

    The best available estimate is kept on ``estimate`` so callers can decide
    whether it is still usable.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NumericError(ArithmeticError):
    """Non-finite intermediate or an internal consistency check failed."""


class SamplingError(RuntimeError):
    """Monte-Carlo sampler could not produce a valid draw."""


class AccuracyWarning(UserWarning):
    """A numeric result was produced but its self-diagnostic looks poor."""
