"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, unknown keys, out-of-range values."""


class UsageError(RuntimeError):
    """API called out of order or on an object in the wrong state."""
