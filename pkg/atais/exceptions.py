"""Exceptions raised by the atais package."""


class AtaisError(Exception):
    """Base error for the package."""


class ConfigError(AtaisError):
    """Error to indicate an invalid configuration or missing input file."""


class NumericalError(AtaisError):
    """Error to indicate a hard numerical failure."""


class DomainError(NumericalError, ValueError):
    """Error to indicate an argument outside the domain of a density or solver."""


class DimensionMismatchError(NumericalError, ValueError):
    """Error to indicate a forward map output of the wrong length."""


class KeplerConvergenceError(NumericalError):
    """Error to indicate the Kepler solver did not reach its tolerance."""


class OracleError(NumericalError):
    """Error to indicate the oracle grid does not cover the density support."""


class OracleUncertifiedError(AtaisError):
    """Error to indicate the oracle grid failed its refinement check."""
