"""Exception hierarchy shared by all fluctlab modules."""


class FluctlabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FluctlabError, ValueError):
    """An input lies outside the domain of an operation."""


class ExhaustionError(FluctlabError):
    """A scan or stream ran out before producing the requested items.

    ``partial`` carries whatever was produced before the limit was hit.
    """

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = tuple(partial)


class CapacityError(FluctlabError):
    """A request exceeds the fixed capacity of an exact engine."""


class ConfigError(FluctlabError, ValueError):
    """A configuration document failed validation."""
