"""Exception types shared across the package."""


class AutoALError(Exception):
    """Base class for all package errors."""


class ShapeError(AutoALError, ValueError):
    """Array dimensions do not agree."""


class InputError(AutoALError, ValueError):
    """An argument is out of range, malformed or non-finite."""


class StateError(AutoALError, RuntimeError):
    """An object is used in a state that does not permit the call."""


class FormatError(AutoALError, ValueError):
    """A data file does not follow its declared format."""


class TrainingError(AutoALError, RuntimeError):
    """Optimization diverged. ``diagnostics`` carries whatever was recorded."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
