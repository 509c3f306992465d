"""Exception types shared across the package."""


class SmlbError(Exception):
    """Base class for all package errors."""


class ConfigError(SmlbError, ValueError):
    """Invalid parameters or experiment configuration."""


class NumericalGuardError(SmlbError, ArithmeticError):
    """A matrix failed an SPD or conditioning guard."""
