"""Exception types shared across the package."""


class StickyLabError(Exception):
    """Base class for all stickylab errors."""


class InvalidArgumentError(StickyLabError, ValueError):
    """A precondition on an argument was violated."""


class GridMismatchError(StickyLabError, ValueError):
    """Two paths that must share a grid do not."""


class UnsupportedGridError(StickyLabError, ValueError):
    """The operation requires a grid shape (e.g. uniform spacing) it did not get."""


class NumericalFailureError(StickyLabError, RuntimeError):
    """A numerical routine failed even after its mandated fallback."""


class DomainViolationError(StickyLabError, ValueError):
    """A path value fell outside a scalar map's domain."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TimeChangeRangeError(StickyLabError, ValueError):
    """A time change produced times outside the path's grid span."""


class InvalidRuleError(StickyLabError, ValueError):
    """A stopping rule is malformed or unusable on the given grid."""


class ContractViolationError(StickyLabError, ValueError):
    """An interface contract (e.g. f(0) = 0) was violated."""


class DegenerateInputError(StickyLabError, ValueError):
    """The input is degenerate for the requested operation (e.g. zero quadratic variation)."""


class AlignmentError(StickyLabError, ValueError):
    """Strategy breakpoints do not line up with the price grid."""


class ConfigError(StickyLabError, ValueError):
    """An experiment configuration could not be resolved."""
