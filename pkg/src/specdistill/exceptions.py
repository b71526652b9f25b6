"""Exception hierarchy.

Every error carries the process exit code the command line front end
reports for it: 3 for bad input data, 4 for numeric failures.
"""

import warnings


class SpecDistillError(Exception):
    exit_code = 3


class DataError(SpecDistillError, ValueError):
    """Input could not be interpreted."""


class BadMagic(DataError):
    pass


class UnsupportedDtype(DataError):
    pass


class FortranOrderUnsupported(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class SpatialMismatch(ShapeMismatch):
    pass


class LabelOutOfRange(DataError):
    pass


class KOutOfRange(DataError):
    pass


class BudgetExceeded(DataError):
    pass


class ZeroProfile(DataError):
    pass


class NoLayersFound(DataError):
    pass


class ConfigError(DataError):
    pass


class NumericFailure(SpecDistillError, ArithmeticError):
    exit_code = 4


class DegenerateRangeWarning(UserWarning):
    pass


def warn_degenerate(msg):
    warnings.warn(msg, DegenerateRangeWarning, stacklevel=3)
