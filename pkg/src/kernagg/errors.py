"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class KernaggError(Exception):
    """Base class for all package errors."""


class ConfigError(KernaggError):
    """Invalid parameter, flag, or configuration value."""


class DataError(KernaggError):
    """Unreadable, malformed, or inconsistent input data."""


class NumericalError(KernaggError):
    """A computation failed to produce a usable finite result."""
