"""Exception types shared across the package."""


class LatentOptError(Exception):
    """Base class for all package errors."""


class ConfigError(LatentOptError):
    """Invalid configuration: bad dimensions, unknown names, malformed files."""


class OracleError(LatentOptError):
    """A black-box evaluator failed (crash, malformed reply, non-finite value).

    ``payload`` carries the raw reply or stderr text when one is available.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class EstimatorError(LatentOptError):
    """Gradient estimation failed; ``query_index`` identifies the offending query
    (-1 for the unperturbed base evaluation)."""

    def __init__(self, message, query_index=None):
        super().__init__(message)
        self.query_index = query_index


class DomainError(LatentOptError):
    """Input outside a metric's mathematical domain."""
