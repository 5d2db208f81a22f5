"""Exception hierarchy shared by all modules."""


class HpmfError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(HpmfError, ValueError):
    pass


class ModeOutOfRange(HpmfError, IndexError):
    pass


class ColumnMismatch(ShapeMismatch):
    pass


class NonFinite(HpmfError, FloatingPointError):
    """Raised on NaN/Inf input, and by the solver's guard on non-finite iterates."""


class TooLarge(HpmfError, ValueError):
    pass


class NegativeThreshold(HpmfError, ValueError):
    pass


class ZeroMatrix(HpmfError, ValueError):
    pass


class EmptyObservation(HpmfError, ValueError):
    pass


class RankEstimationFailure(HpmfError, ValueError):
    pass


class ZeroDenominator(HpmfError, ZeroDivisionError):
    pass


class ZeroReference(ZeroDenominator):
    pass


class MaskSizeMismatch(ShapeMismatch):
    pass


class SrOutOfRange(HpmfError, ValueError):
    pass


class ImageTooSmall(HpmfError, ValueError):
    pass


class InvalidConfig(HpmfError, ValueError):
    pass
