"""Exception hierarchy shared by every stage of the engine."""

from __future__ import annotations


class AidwError(ValueError):
    """Base class for all engine errors."""


class EmptyInputError(AidwError):
    """A point set (or the union of point sets) holds no points."""


class InvalidRegionError(AidwError):
    """A bounding box or area is degenerate where positive extent is required."""


class OutOfDomainError(AidwError):
    """A point lies outside the region covered by a grid."""


class InsufficientPointsError(AidwError):
    """Fewer data points than requested neighbors."""


class EmptyIndexError(AidwError):
    """A grid index holds no data points."""


class DomainError(AidwError):
    """A scalar argument lies outside the domain of a membership function."""


class ContractError(AidwError):
    """Inputs of a stage disagree with each other (e.g. length mismatch)."""


class GridIndexError(AidwError, IndexError):
    """Cell coordinates outside ``[0, nCol) x [0, nRow)``."""


class PointFileError(AidwError):
    """A point file could not be parsed.

    ``line`` is the 1-based line number of the offending row (header is line 1).
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class StageError(AidwError):
    """A per-index operation failed inside a parallel stage."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"item {index} failed: {cause}")
        self.index = index
        self.cause = cause
