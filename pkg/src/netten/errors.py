"""Exception hierarchy shared by all netten modules."""


class NettenError(Exception):
    """Base class for every error raised by this package."""


class InputError(NettenError, ValueError):
    """Caller passed an argument that violates an operation's precondition."""


class RecordFormatError(InputError):
    """An LFP record file is malformed or violates record invariants."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpecError(InputError):
    """A synthesis spec is inconsistent (e.g. overlapping events)."""


class CalibrationError(NettenError):
    """A calibration target cannot be reached."""


class ConfigError(InputError):
    """A network configuration or manifest is invalid."""


class OrderingError(InputError):
    """Spike times were presented out of chronological order."""


class NumericError(NettenError, ArithmeticError):
    """Integration produced a non-finite value."""
