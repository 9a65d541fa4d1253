"""
Exception hierarchy shared by every cxverb module.  Value-type failures also derive from ValueError so callers
that only know the standard library still catch them.
"""


class CxverbError(Exception):
    """Base class for all cxverb errors."""


class ShapeError(CxverbError, ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class ArgumentError(CxverbError, ValueError):
    """An argument value is outside the operation's domain."""


class ConfigError(CxverbError, ValueError):
    """A configuration is internally inconsistent."""


class DataError(CxverbError, ValueError):
    """Input data is empty, too short, silent or otherwise unusable."""


class FormatError(DataError):
    """A file does not have the expected format."""


class UnsupportedOpError(CxverbError, RuntimeError):
    """A primitive without a registered backward rule was recorded on a tape."""


class DegenerateWeightError(CxverbError, ArithmeticError):
    """A weight has no usable spectral norm (for example, it is all zeros)."""


class NonFiniteLossError(CxverbError, ArithmeticError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, step: int, losses: dict) -> None:
        """
        :param message: Human-readable description.
        :param step: Training step at which the loss became non-finite.
        :param losses: Loss values logged at that step.
        """
        super().__init__(message)
        self.step = step
        self.losses = dict(losses)
