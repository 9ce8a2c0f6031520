"""Exception types shared across the package.

ConfigError covers invalid parameter combinations and malformed config
documents; DataError covers everything wrong with the data itself
(missing files, non-numeric cells, dimension mismatches, unknown feature
names). The CLI maps ConfigError to exit code 1 and DataError to 2.
"""


class UforestError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(UforestError):
    """Invalid configuration value, flag combination, or config document."""


class DataError(UforestError):
    """Invalid or unusable input data."""
