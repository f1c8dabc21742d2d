"""Exceptions and warnings raised by hspr"""


class HsprError(Exception):
    """Base class of all errors raised by hspr"""


class InvalidArgumentError(HsprError, ValueError):
    """An argument violates the precondition of an operation"""


class ConfigurationError(HsprError, ValueError):
    """A configuration value is invalid or inconsistent"""


class ModelError(HsprError, ValueError):
    """A physical model is evaluated outside its domain"""


class CubeFormatError(HsprError, ValueError):
    """A cube file is malformed or lacks required metadata"""


class PhaseWrapWarning(UserWarning):
    """Object phase reaches pi, so wrapped phases become ambiguous"""
