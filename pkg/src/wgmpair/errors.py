"""Exception types shared across the package."""


class WGMPairError(Exception):
    """Base class for all package errors."""


class DomainError(WGMPairError, ValueError):
    """An input lies outside the domain of an operation."""


class ConvergenceError(WGMPairError, RuntimeError):
    """An iterative solver failed to converge."""


class NotFoundError(WGMPairError, LookupError):
    """A bracketed search found no root."""


class UnsupportedScaleError(WGMPairError, ValueError):
    """The request exceeds the size a routine is validated for."""


class ContractError(WGMPairError, ValueError):
    """An input violates a structural precondition (ordering, labels)."""


class ConfigError(WGMPairError, ValueError):
    """A configuration file or value could not be parsed."""
