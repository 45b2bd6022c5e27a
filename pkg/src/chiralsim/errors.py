"""Exception types shared across the package."""


class ChiralsimError(Exception):
    """Base class for package errors."""


class DomainError(ChiralsimError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class GridError(ChiralsimError, ValueError):
    """A frequency or time grid does not meet the resolution requirements."""


class SingularSystemError(ChiralsimError, ArithmeticError):
    """A linear system is too ill-conditioned to solve reliably."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class IntegrationQualityError(ChiralsimError, ArithmeticError):
    """Time integration violated trace or positivity tolerances."""


class ConvergenceError(ChiralsimError, ArithmeticError):
    """An iterative procedure did not settle within tolerance."""


class ConfigError(ChiralsimError):
    """Configuration file is missing or malformed."""
