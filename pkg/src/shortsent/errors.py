"""Exception taxonomy shared across the package."""


class ShortsentError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ShortsentError):
    """Tensor shapes do not satisfy an operation's contract."""


class DomainError(ShortsentError):
    """A value lies outside the mathematical domain of an operation."""


class ContractError(ShortsentError):
    """An argument violates a structural precondition (e.g. not one-hot)."""


class ConfigError(ShortsentError):
    """Invalid configuration value or unknown option."""


class InputError(ShortsentError):
    """Malformed or out-of-range user input."""


class StateError(ShortsentError):
    """Operation invoked before its required state exists."""


class FormatError(ShortsentError):
    """A file or archive does not match its expected format."""
