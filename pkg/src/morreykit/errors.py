"""Exception hierarchy shared by all modules."""


class MorreyKitError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MorreyKitError, ValueError):
    """A point lies outside the closed box, or an argument is out of range."""


class ConvergenceError(MorreyKitError, ArithmeticError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DivergenceError(MorreyKitError, ArithmeticError):
    """An improper integral does not converge."""

    def __init__(self, message, exponent=None):
        super().__init__(message)
        self.exponent = exponent


class P3Violation(DivergenceError):
    """The integrand of the Sobolev-conjugate integral is not integrable at 0."""
