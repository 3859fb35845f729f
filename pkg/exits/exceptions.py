"""
Exceptions raised by the pseudo-label toolkit

Every error is either an InputError (the caller handed us something invalid,
CLI exit code 2) or a NumericalError (the numbers did not work out, CLI exit
code 3).
"""


from typing import Optional


__all__ = [
    "ExitsError", "InputError", "NumericalError",
    "BadDimensions", "BadMagic", "ConfigError", "EmptyBackground", "EmptyList",
    "EmptyMask", "EmptySeedSet", "InvalidParameter", "InvalidThresholds",
    "NegativeEntry", "NotDivisible", "OutOfWindow", "OverlapError", "ParseError",
    "PlacementFailure", "SizeMismatch", "TruncatedFile",
    "DivisionByZero", "NoConvergence", "NonFinite", "SingularSystem"
]


class ExitsError(Exception):
    """
    Base class for all toolkit errors
    """

    exit_code = 1


class InputError(ExitsError, ValueError):
    """
    Invalid input: bad arguments, files or configuration
    """

    exit_code = 2


class NumericalError(ExitsError, ArithmeticError):
    """
    Numerical failure: no convergence, singular systems, non-finite values
    """

    exit_code = 3


class InvalidParameter(InputError):
    """
    A value violates the invariants of its type
    """


class SizeMismatch(InputError):
    """
    Arrays that must share a shape do not
    """


class EmptyList(InputError):
    """
    A non-empty sequence was expected
    """


class EmptyMask(InputError):
    """
    The mask has no foreground pixel
    """


class EmptyBackground(InputError):
    """
    No patch of the crop window lies entirely outside the box
    """


class OutOfWindow(InputError):
    """
    A pixel lies outside the crop window
    """


class EmptySeedSet(InputError):
    """
    A seed point set is empty
    """


class InvalidThresholds(InputError):
    """
    The background threshold is not below the foreground threshold
    """


class OverlapError(InputError):
    """
    A node is claimed by foreground and background at the same time
    """


class NotDivisible(InputError):
    """
    A mask side is not divisible by the patch count
    """


class PlacementFailure(InputError):
    """
    Objects could not be placed without overlapping
    """


class ConfigError(InputError):
    """
    The run configuration is invalid
    """


class BadMagic(InputError):
    """
    The file does not start with the expected magic bytes
    """


class TruncatedFile(InputError):
    """
    The file is shorter than its header announces
    """


class BadDimensions(InputError):
    """
    The file header carries unsupported dimensions or sample depth
    """


class NegativeEntry(InputError):
    """
    A similarity matrix file holds a negative value
    """

    def __init__(self, row: int, col: int, value: float):
        super().__init__("Negative similarity {} at ({}, {})".format(value, row, col))
        self.row = row
        self.col = col
        self.value = value


class ParseError(InputError):
    """
    A text record could not be parsed
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)
        self.line = line


class NoConvergence(NumericalError):
    """
    An iterative method exhausted its iteration budget
    """

    def __init__(self, iterations: int, deviation: float, tolerance: float):
        super().__init__(
            "No convergence after {} iterations: deviation {}, tolerance {}".format(
                iterations, deviation, tolerance
            )
        )
        self.iterations = iterations
        self.deviation = deviation
        self.tolerance = tolerance


class SingularSystem(NumericalError):
    """
    A linear system could not be solved
    """


class NonFinite(NumericalError):
    """
    A value that must be finite is NaN or infinite
    """


class DivisionByZero(NumericalError):
    """
    A ratio has a zero denominator
    """
