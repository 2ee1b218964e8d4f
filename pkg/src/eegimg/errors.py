"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
OSError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration, flags, or parameter values."""


class DataError(ValueError):
    """Data violates a contract (dimensions, ranges, alignment)."""


class FormatError(DataError):
    """A container file does not match its declared format."""
