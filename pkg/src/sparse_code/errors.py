"""Exception hierarchy shared by every module in the package."""


class SparseCodeError(Exception):
    """Base class for all package errors."""


class InvalidTriplet(SparseCodeError, ValueError):
    pass


class InvalidPartition(SparseCodeError, ValueError):
    pass


class ShapeError(SparseCodeError, ValueError):
    pass


class UnsupportedSupport(SparseCodeError, ValueError):
    pass


class InvalidParameter(SparseCodeError, ValueError):
    pass


class DimensionMismatch(SparseCodeError, ValueError):
    pass


class InsufficientWorkers(SparseCodeError, ValueError):
    pass


class RankDeficient(SparseCodeError):
    """The collected coefficient rows do not span the block space."""


class SingularSystem(SparseCodeError):
    pass


class Infeasible(SparseCodeError):
    """Optimizer constraints cannot be met; ``family`` names the culprit."""

    def __init__(self, family: str, message: str = ""):
        self.family = family
        super().__init__(message or f"infeasible: {family} constraints")


class ParseError(SparseCodeError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ConfigError(SparseCodeError, ValueError):
    pass


class DecodeMismatch(SparseCodeError):
    """Decoded product disagrees with the brute-force reference."""
