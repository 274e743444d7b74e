"""Exception hierarchy shared by every module."""


class JointCatoniError(Exception):
    """Base class for all package errors."""


class ConfigError(JointCatoniError, ValueError):
    """Invalid configuration value or malformed config file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InputError(JointCatoniError, ValueError):
    """Data that violates an operation's preconditions."""


class DesignError(JointCatoniError, ValueError):
    """Singular or otherwise unusable design matrix."""


class NumericError(JointCatoniError, ArithmeticError):
    """Non-finite values or failed convergence inside a numerical routine."""


class FormatError(JointCatoniError, ValueError):
    """Malformed CSV input."""
