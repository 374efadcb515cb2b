"""Exception hierarchy shared across the runtime."""


class MError(Exception):
    """Base class for all runtime errors."""


class InvalidDuration(MError, ValueError):
    """A duration argument was zero, negative, or otherwise unusable."""
