"""Exception types raised across the package."""


class NoncriticalError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(NoncriticalError, ValueError):
    """Invalid geometric input (degenerate window, bad shape parameters)."""


class EmptyRegionError(GeometryError):
    """An operation needs a nonempty set but got an empty one."""


class NotCompactError(NoncriticalError):
    """A set that must be compact touches the window boundary."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class ResolutionError(NoncriticalError):
    """A length scale collapsed below the raster resolution."""


class ExhaustionError(NoncriticalError):
    """The exhaustion could not be built on the given window."""

    def __init__(self, msg, stage=None, witness=None):
        super().__init__(msg)
        self.stage = stage
        self.witness = witness


class FitError(NoncriticalError):
    """Polynomial fitting failed (for example rank deficiency)."""


class CriticalPointError(NoncriticalError):
    """A derivative vanishes (numerically) where it must not."""

    def __init__(self, msg, location=None):
        super().__init__(msg)
        self.location = location


class BranchError(NoncriticalError):
    """Logarithm branch continuation is inconsistent on a cycle."""


class QuadratureError(NoncriticalError):
    """Adaptive quadrature could not reach the requested tolerance."""


class RelocationError(NoncriticalError):
    """No admissible translation moves the critical points off the set."""


class BudgetError(NoncriticalError):
    """Budget inputs violate their monotonicity or positivity contract."""


class StageError(NoncriticalError):
    """A pipeline stage could not meet one of its error budgets."""

    def __init__(self, msg, stage=None, step=None, witness=None):
        super().__init__(msg)
        self.stage = stage
        self.step = step
        self.witness = witness


class ContourError(NoncriticalError):
    """Argument-principle count failed (zero on or too close to contour)."""
