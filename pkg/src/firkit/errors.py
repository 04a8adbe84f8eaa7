"""Exception types shared across the package.

Every error carries a short machine-greppable ``reason`` code that the
command line prints in front of the message.
"""


class FirkitError(Exception):
    """Base class for all package errors."""

    reason = "error"


class ModelConsistencyError(FirkitError):
    """Model matrices are dimensionally or numerically inconsistent."""

    reason = "model-consistency"


class SingularityError(FirkitError):
    """A matrix that must be invertible is numerically singular."""

    reason = "singular"


class NotObservableError(FirkitError):
    """The measurement window does not pin down the full state (yet)."""

    reason = "not-observable"


class UnsupportedConfigurationError(FirkitError):
    """The requested strategy cannot run on this model configuration."""

    reason = "unsupported-configuration"


class ConfigError(FirkitError):
    """An experiment or model configuration file is invalid."""

    reason = "config"
