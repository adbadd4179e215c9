"""
Exceptions raised by the QNC toolkit.
"""


class QNCError(Exception):
    """Base class for toolkit errors."""


class ConfigError(QNCError, ValueError):
    """Invalid experiment configuration or environment setting."""


class DecodingError(QNCError, RuntimeError):
    """A decoder produced non-finite state and had to stop."""
