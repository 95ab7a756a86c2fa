"""Exception hierarchy shared by all modules."""


class PerishableError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PerishableError, ValueError):
    """Invalid argument values (negative quantities, bad cost parameters...)."""


class ConfigurationError(PerishableError, ValueError):
    """A model or experiment configuration cannot be used as given."""


class CapabilityError(PerishableError):
    """The requested computation is not supported by the supplied model."""


class SearchBoundError(PerishableError):
    """A quantity search hit its upper bound without a valid answer."""


class ResourceError(PerishableError):
    """A computation would exceed the configured size limit."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class ConsistencyError(PerishableError):
    """Internal consistency check failed (e.g. lower bound above upper bound)."""
