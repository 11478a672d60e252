"""Exception hierarchy. Every error raised by the library derives from PrioqError."""


class PrioqError(ValueError):
    """Base class for all library errors."""


class SimplexViolation(PrioqError):
    pass


class Unstable(PrioqError):
    pass


class UnsupportedRegime(PrioqError):
    pass


class PoleAtY(PrioqError):
    pass


class PoleAtX(PrioqError):
    pass


class KernelZero(PrioqError):
    pass


class DimensionMismatch(PrioqError):
    pass


class RadiusConflict(PrioqError):
    pass


class NoBracket(PrioqError):
    pass


class InstabilityOnPath(PrioqError):
    pass


class WindowTooSmall(PrioqError):
    pass


class BudgetExceeded(PrioqError):
    """Iteration cap reached. ``grid`` carries the best-effort result."""

    def __init__(self, message, grid=None):
        super().__init__(message)
        self.grid = grid
