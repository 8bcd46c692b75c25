"""Exception types shared across the package."""


class KamaMsrError(Exception):
    """Base class for package errors."""


class DataError(KamaMsrError):
    """Raised for unreadable, malformed, or contract-violating input data."""


class ConfigError(KamaMsrError):
    """Raised for invalid configuration (bad keys, impossible settings)."""


class FitError(KamaMsrError):
    """Raised when an estimation procedure cannot produce a usable fit."""
