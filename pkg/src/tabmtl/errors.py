"""Exception types shared across the toolkit."""


class TabmtlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TabmtlError):
    """Invalid configuration, schema, or argument values."""


class DataError(TabmtlError):
    """Malformed or inconsistent input data (messages carry row/column context)."""


class NumericalError(TabmtlError):
    """Non-finite values encountered during optimization or evaluation."""
