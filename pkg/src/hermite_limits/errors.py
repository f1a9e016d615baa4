"""Exception hierarchy shared by every module.

Validation problems derive from :class:`ValueError`; numerical failures derive
from :class:`ArithmeticError`.  The command line maps the first group to exit
code 1 and the second to exit code 2.
"""


class HermiteLimitsError(Exception):
    """Base class for all library errors."""


class DomainError(HermiteLimitsError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class AlignmentError(DomainError):
    """A horizon or lag is not an integer multiple of the grid mesh."""


class ConfigError(DomainError):
    """An experiment or CLI configuration is inconsistent."""


class RegimeError(DomainError):
    """The requested quantity is not defined in this Hurst regime."""


class DivergenceError(RegimeError):
    """An improper integral diverges for the given parameters."""


class NumericalError(HermiteLimitsError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    """Quadrature did not converge to the requested tolerance."""


class EmbeddingError(NumericalError):
    """The circulant embedding produced a materially negative eigenvalue."""
