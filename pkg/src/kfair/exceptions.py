"""Exception hierarchy shared by every module."""


class KFairError(Exception):
    """Base class for all errors raised by kfair."""


class InputError(KFairError, ValueError):
    """Malformed input: wrong dimensions, non-finite values, bad files."""


class SchemaError(KFairError, ValueError):
    """Schema definition or instance is inconsistent with the schema."""


class UnsupportedNetworkError(KFairError, ValueError):
    """The network shape is outside what an operation supports."""


class DegenerateKError(KFairError):
    """All sampled k values are equal, so no high/low split exists."""


class DivergenceError(KFairError, ArithmeticError):
    """Training produced a non-finite loss."""


class NumericalError(KFairError, ArithmeticError):
    """A simplex pivot hit a singular or non-finite basis."""
