"""Exception types shared across the package.

DataError maps to CLI exit code 1, ConfigError to exit code 2.
"""


class PsqeError(Exception):
    """Base class for package errors."""


class DataError(PsqeError):
    """Bad or inconsistent input data (files, matrices, graphs)."""


class ConfigError(PsqeError):
    """Invalid configuration value or combination."""
