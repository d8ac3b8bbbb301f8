"""Exception and warning types raised by zonofusion."""


class ZonoFusionError(Exception):
    """Base class for all library errors."""


class DimensionError(ZonoFusionError, ValueError):
    pass


class InvalidOrderError(ZonoFusionError, ValueError):
    pass


class InvalidDirectionError(ZonoFusionError, ValueError):
    pass


class InvalidWeightError(ZonoFusionError, ValueError):
    pass


class EmptySetError(ZonoFusionError, ValueError):
    pass


class DegenerateZonotopeError(ZonoFusionError):
    """Generator matrix does not have full row rank."""


class FlatSetError(ZonoFusionError):
    pass


class EmptyIntersectionError(ZonoFusionError):
    pass


class UnboundedError(ZonoFusionError):
    pass


class DegenerateStripError(ZonoFusionError):
    pass


class NotCentrallySymmetricError(ZonoFusionError):
    pass


class SingularInnovationError(ZonoFusionError, ArithmeticError):
    pass


class RankDeficiencyError(ZonoFusionError, ArithmeticError):
    pass


class SingularSumError(ZonoFusionError, ArithmeticError):
    pass


class InclusionViolationError(ZonoFusionError):
    """A certified membership check failed during a simulation run."""

    def __init__(self, step, what):
        super().__init__(f"state inclusion violated at step {step}: {what}")
        self.step = step
        self.what = what


class ConvergenceWarning(UserWarning):
    pass


class DegenerateWarning(UserWarning):
    """Membership was decided by the least-norm fallback."""
