"""Exception types shared across the package."""


class QThermoError(Exception):
    """Base class for all package errors."""


class ConfigError(QThermoError):
    """Invalid configuration (bad key, bad range, malformed file)."""


class OutOfWindowError(QThermoError):
    """A base-orbit shift outside the materialized window was requested."""


class DomainError(QThermoError):
    """An argument is outside the mathematical domain of the operation."""


class NumericalError(QThermoError):
    """A numerical routine failed to converge or produced non-finite values."""


class BurnInError(QThermoError):
    """Warm-up / burn-in depth is insufficient for the requested tolerance."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class InsufficientDataError(QThermoError):
    """Not enough usable data points for a fit."""
