"""Exception hierarchy shared across the package."""


class QStreamError(Exception):
    """Base class for all package-specific errors."""


class DomainError(QStreamError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InfeasibleTarget(QStreamError):
    """No policy can meet the requested (D, eps) pair."""


class BranchDomainError(QStreamError):
    """The below-threshold design formula was evaluated outside its domain.

    Surfaced instead of clamping: it indicates the target sits so close to
    the infeasible boundary that the closed form is numerically meaningless.
    """


class InfeasibleState(QStreamError):
    """An expanded state (Q, p) lies below the feasible region."""


class StencilOutOfRegion(QStreamError):
    """A finite-difference stencil leaves the sub-region of validity."""


class SimulationOverrun(QStreamError):
    """A replica exceeded the event budget.

    Attributes
    ----------
    replica : int
        Index of the offending replica stream.
    """

    def __init__(self, message: str, replica: int = -1):
        super().__init__(message)
        self.replica = replica


class StepOverrun(SimulationOverrun):
    """A discretized SDE replica exceeded the step budget."""


class LengthMismatch(QStreamError, ValueError):
    """Coded-packet dimensions do not match the decoder block."""
