"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class RwExponentError(Exception):
    """Base class for every error raised by this package."""


class InvalidChain(RwExponentError, ValueError):
    """Input matrix is not a usable transition matrix."""


class NotStochastic(InvalidChain):
    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f"row {row} sums to {total!r}, expected 1")


class Reducible(InvalidChain):
    def __init__(self, unreachable: list[int], direction: str = "from node 0"):
        self.unreachable = unreachable
        super().__init__(f"chain is reducible: nodes {unreachable} not reachable {direction}")


class Periodic(InvalidChain):
    def __init__(self, period: int):
        self.period = period
        super().__init__(f"chain is periodic with period {period}")


class BadDimension(RwExponentError, ValueError):
    pass


class IndexOutOfRange(RwExponentError, IndexError):
    pass


class LengthMismatch(RwExponentError, ValueError):
    pass


class DimensionMismatch(RwExponentError, ValueError):
    pass


class InstanceTooLarge(RwExponentError, ValueError):
    pass


class SupportViolation(RwExponentError, ValueError):
    """An edge measure puts mass where the transition matrix is zero."""


class BoundaryPoint(RwExponentError, ValueError):
    """Gradient requested at a point where it is not finite."""


class NoCycle(RwExponentError):
    pass


class NonConvergence(RwExponentError, RuntimeError):
    pass


class NotApplicable(RwExponentError, ValueError):
    pass


class BracketFailure(RwExponentError, RuntimeError):
    pass


class MaxItersExceeded(RwExponentError, RuntimeError):
    """Frank-Wolfe hit its iteration cap; ``result`` holds the best iterate."""

    def __init__(self, result):
        self.result = result
        super().__init__(
            f"Frank-Wolfe stopped after {result.iters} iterations with gap {result.gap:.3e}"
        )
