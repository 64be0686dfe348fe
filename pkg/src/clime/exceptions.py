"""Exception types raised across the package."""


class ClimeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ClimeError, ValueError):
    pass


class NotSymmetric(ClimeError, ValueError):
    pass


class NotPositiveDefinite(ClimeError, ValueError):
    pass


class NonConvergence(ClimeError, RuntimeError):
    """Iterative method stopped without meeting its tolerance.

    ``estimate`` carries the best value found so far.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class TooFewSamples(ClimeError, ValueError):
    pass


class ZeroVariance(ClimeError, ValueError):
    pass


class SolverFailure(ClimeError, RuntimeError):
    """A column LP did not reach optimality; ``column`` is 0-based."""

    def __init__(self, message, column=None, solution=None):
        super().__init__(message)
        self.column = column
        self.solution = solution


class CyclingDetected(ClimeError, RuntimeError):
    pass


class AllZero(ClimeError, ValueError):
    pass


class NotPositiveDefinitePath(ClimeError, RuntimeError):
    pass


class DegenerateDraw(ClimeError, RuntimeError):
    pass


class AllInfeasible(ClimeError, RuntimeError):
    pass


class InsufficientClassSize(ClimeError, ValueError):
    pass
