"""Exception hierarchy shared by all modules."""


class VacuumLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(VacuumLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularMatrixError(VacuumLabError, ArithmeticError):
    """A matrix that must be invertible has (numerically) vanishing determinant."""


class StepFailureError(VacuumLabError, RuntimeError):
    """Time integration could not continue (collapse, non-finite state)."""


class InsufficientHorizonError(VacuumLabError, RuntimeError):
    """A trajectory is too short for a requested asymptotic extraction."""


class NonConvergenceError(VacuumLabError, RuntimeError):
    """A refinement loop failed to settle within its tolerance."""


class ResolutionError(VacuumLabError, ValueError):
    """The grid or field cannot supply the requested number of derivatives."""


class RegimeError(VacuumLabError, ValueError):
    """An operation was requested outside the adiabatic-exponent range it covers."""


class GuardViolation(VacuumLabError, RuntimeError):
    """The flow map left the near-identity regime ``|eta_x - 1| <= 1/10``.

    ``node`` is the offending node index and ``x`` its coordinate.
    """

    def __init__(self, message, node=None, x=None, t=None, value=None):
        super().__init__(message)
        self.node = node
        self.x = x
        self.t = t
        self.value = value


class CFLViolation(VacuumLabError, ValueError):
    """Requested time step exceeds the stability bound."""


class ConfigError(VacuumLabError, ValueError):
    """Scenario configuration failed validation; ``path`` names the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CheckpointError(VacuumLabError, RuntimeError):
    """Checkpoint unreadable, corrupted or incompatible."""
