"""Exception types shared across the toolkit.

The CLI maps ``ConfigError`` to exit code 1 and ``DataError`` to exit code 2.
"""


class MosekitError(Exception):
    """Base class for toolkit errors."""


class ConfigError(MosekitError, ValueError):
    """Bad flags, configuration values or parameter grids."""


class DataError(MosekitError, ValueError):
    """Unreadable or inconsistent input data."""
