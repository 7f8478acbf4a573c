"""Exception hierarchy for the simulator."""


class ZrpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ZrpError):
    """Invalid configuration file, parameters, or experiment setup."""


class DomainError(ZrpError):
    """An argument lies outside the mathematical domain of an operation."""


class StateError(ZrpError):
    """A configuration or coupled state violates a structural invariant."""


class InputError(ZrpError):
    """Input data (initial configuration, generator) is unusable."""
