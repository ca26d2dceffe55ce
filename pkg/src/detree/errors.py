"""Exception hierarchy shared by every detree module."""


class DETError(Exception):
    """Base class for all errors raised by detree."""


class DimensionMismatch(DETError, ValueError):
    pass


class InvalidVolume(DETError, ValueError):
    pass


class InvalidWeight(DETError, ValueError):
    pass


class EmptyDataset(DETError, ValueError):
    pass


class PointOutsideBox(DETError, ValueError):
    pass


class NoFreeDimensions(DETError, ValueError):
    pass


class NoSupport(DETError, ValueError):
    """The queried slice or point has no populated leaf."""


class IncompatibleSupport(DETError, ValueError):
    """Two trees do not share dimensions and root box."""


class NegativeScale(DETError, ValueError):
    pass


class NegativeDensity(DETError, ValueError):
    pass


class InconsistentRatio(DETError, ArithmeticError):
    """Division of a positive value by a zero-density leaf."""


class UnknownDimension(DETError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParseError(DETError, ValueError):
    def __init__(self, row, column, reason):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class MissingColumn(DETError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NegativeWeight(DETError, ValueError):
    pass


class UnsupportedVersion(DETError, ValueError):
    pass


class CorruptFile(DETError, ValueError):
    pass


class IoFailure(DETError, OSError):
    pass
