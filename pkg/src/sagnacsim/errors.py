"""Exception hierarchy shared by all modules."""


class SagnacSimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SagnacSimError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResolutionError(SagnacSimError, ValueError):
    """A frequency grid is too coarse (or too narrow) for the features on it."""


class GridMismatchError(SagnacSimError, ValueError):
    """Two spectral objects live on different frequency grids."""


class NumericalError(SagnacSimError, RuntimeError):
    """A numerical routine failed (SVD, eigen-solver, fit)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UndefinedAngleError(SagnacSimError, ValueError):
    """Fringe angle is undefined because the relevant delays cancel."""


class NoFringeError(SagnacSimError, ValueError):
    """No fringe component stands out of the spectrum of a grid."""


class StatisticsError(SagnacSimError, RuntimeError):
    """Too few events for a meaningful estimate."""


class InformationalCompletenessError(SagnacSimError, ValueError):
    """Measurement settings do not span the two-qubit operator space."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap; ``last_iterate`` holds its state."""

    def __init__(self, message, last_iterate=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.last_iterate = last_iterate


class ConfigError(SagnacSimError, ValueError):
    """A scenario configuration failed schema or range validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
