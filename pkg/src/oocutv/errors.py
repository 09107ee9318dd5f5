"""Exception hierarchy for the out-of-core solver."""


class OocError(Exception):
    """Base class for every error raised by oocutv."""


class StoreFormatError(OocError, ValueError):
    """A tile store file has a bad header, size or dimensions."""


class TileCoordinateError(OocError, IndexError):
    """Tile coordinates fall outside the block grid."""


class ExtentMismatchError(OocError, ValueError):
    """A tile's extents do not match the slot it is written to."""


class ReadOnlyStoreError(OocError, PermissionError):
    """Write attempted on a store opened read-only."""


class CacheCapacityError(OocError, RuntimeError):
    """The cache cannot hold the pinned working set."""


class PinError(OocError, RuntimeError):
    """Pin bookkeeping violated (double release, flush with pinned tiles)."""


class UnknownBlockError(OocError, KeyError):
    """Block refers to a store that is not registered with the cache."""


class ShapeError(OocError, ValueError):
    """Operand shapes do not conform."""


class SingularBlockError(OocError, ArithmeticError):
    """A triangular block has a zero diagonal entry."""


class NumericalFailureError(OocError, ArithmeticError):
    """An iterative kernel did not converge."""


class OptionConflictError(OocError, ValueError):
    """Incompatible options were combined."""


class RankError(OocError, ValueError):
    """Rank or tolerance out of range."""


class MatrixMarketError(OocError, ValueError):
    """Malformed Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TaskFailedError(OocError, RuntimeError):
    """A task body raised; carries the task index and kind."""

    def __init__(self, index: int, kind: str, cause: BaseException):
        self.index = index
        self.kind = kind
        super().__init__(f"task {index} ({kind}) failed: {cause}")
