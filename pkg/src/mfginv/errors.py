"""Exception hierarchy shared by all modules."""


class MfgInvError(Exception):
    """Base class for every structured error raised by the package."""


class GridMismatchError(MfgInvError, ValueError):
    """Field shape or grid parameters do not agree."""


class SolverError(MfgInvError):
    """Picard iteration failed; carries the update history."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class CascadeOrderError(MfgInvError, ValueError):
    """Requested linearization order exceeds the cost truncation."""


class SlopeCheckError(MfgInvError):
    """Observed divided-difference convergence order disagrees with theory."""

    def __init__(self, message, ladder=None):
        super().__init__(message)
        self.ladder = ladder


class ConditioningError(MfgInvError):
    """A small reconstruction solve is too ill-conditioned to trust."""

    def __init__(self, message, population=None, slot=None, frequency=None, condition=None):
        super().__init__(message)
        self.population = population
        self.slot = slot
        self.frequency = frequency
        self.condition = condition


class DecouplingError(MfgInvError):
    """Population 0's running cost does not see some other population."""

    def __init__(self, message, population=None):
        super().__init__(message)
        self.population = population


class StageOrderError(MfgInvError, KeyError):
    """A reconstruction stage read a coefficient that is not recovered yet."""


class ConfigError(MfgInvError, ValueError):
    """Experiment configuration failed schema validation."""
