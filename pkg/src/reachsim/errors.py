"""Shared exception types."""


class ValidationError(ValueError):
    """A specification, configuration or argument constraint was violated."""


class DivergenceError(RuntimeError):
    """The integrator left the trust region (non-finite or runaway state)."""


class ConfigParseError(ValidationError):
    """The config text could not be parsed; message cites key and line."""


class ConfigVersionError(ValidationError):
    """The config declares a schema version this build does not support."""
