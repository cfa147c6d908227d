"""Exception hierarchy shared across the package."""


class LevyExitError(Exception):
    """Base class for all package errors."""


class NumericalFailure(LevyExitError):
    """A quadrature, bisection or linear solve did not converge."""


class DiscretizationFailure(NumericalFailure):
    """The discrete Dirichlet problem violated the maximum principle."""


class CensoringError(LevyExitError):
    """Too many Monte-Carlo paths hit the time cap for the mean to be usable."""


class ConfigError(LevyExitError, ValueError):
    """Malformed or inconsistent run configuration."""
