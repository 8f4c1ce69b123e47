"""Exception hierarchy.

Everything a bad input file or degenerate dataset can trigger derives from
:class:`DataError`; the CLI maps those to exit code 2.
"""


class DataError(Exception):
    """Base class for input/data problems."""


class MalformedRecord(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateTweetId(DataError):
    pass


class UnknownLabel(DataError):
    pass


class DuplicateUser(DataError):
    pass


class MissingProfile(DataError):
    pass


class RowMismatch(DataError):
    pass


class NumericDomain(DataError, ValueError):
    """A point on or outside the unit ball reached a hyperbolic formula."""


class DegenerateData(DataError):
    pass


class InsufficientMinority(DataError):
    pass


class UnknownFeatureSet(DataError, KeyError):
    pass


class EmptyClass(DataError):
    pass


class ZeroVector(DataError, ValueError):
    pass


class InvalidConfig(DataError, ValueError):
    pass


class RankDeficientWarning(UserWarning):
    pass


class DisconnectedGraphWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass
