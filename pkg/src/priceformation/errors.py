"""Exception hierarchy shared by all modules."""


class PriceFormationError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(PriceFormationError, ValueError):
    pass


class NotAdmissible(PriceFormationError, ValueError):
    pass


class OutOfDomain(PriceFormationError, ValueError):
    pass


class TooCloseToBoundary(PriceFormationError, ValueError):
    pass


class IndexOutOfRange(PriceFormationError, IndexError):
    pass


class SolverError(PriceFormationError):
    """Failure of the time stepper or of a free-boundary evaluation.

    ``t`` is the simulation time at which the failure happened (if known) and
    ``trajectory`` the partial record collected before it.
    """

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class NoSignChange(SolverError):
    pass


class NonpositiveSlope(SolverError):
    pass


class BoundaryCollision(SolverError):
    pass


class ConvergenceFailure(PriceFormationError, RuntimeError):
    pass


class NoConvergence(PriceFormationError, RuntimeError):
    pass


class SingularJacobian(PriceFormationError, RuntimeError):
    pass


class NonpositiveError(PriceFormationError, ValueError):
    pass


class ConfigError(PriceFormationError, ValueError):
    pass
