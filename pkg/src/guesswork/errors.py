"""Exception hierarchy shared by every module in the package."""


class GuessworkError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GuessworkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(GuessworkError, ValueError):
    """Inputs are individually valid but inconsistent with one another."""


class ResourceCapError(GuessworkError):
    """An enumeration would exceed the configured size cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class NumericError(GuessworkError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class UnsupportedModelError(GuessworkError):
    """The requested computation is not available for this source model."""
