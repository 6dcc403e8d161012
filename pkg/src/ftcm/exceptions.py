"""Exception types raised across the package."""


class InvalidInput(ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class FormatError(ValueError):
    """A file could not be parsed; the message names the offending location."""


class InternalInvariantViolation(RuntimeError):
    """A structure that should be valid by construction is not."""
