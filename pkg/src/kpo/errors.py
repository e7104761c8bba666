"""Exception hierarchy shared by all kpo modules."""


class KpoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KpoError):
    """Invalid configuration or CLI input."""


class DimensionMismatch(KpoError):
    """Operands live on different Hilbert spaces."""


class TruncationError(KpoError):
    """The Fock-space truncation is too small for the requested state."""


class StiffnessError(KpoError):
    """The adaptive integrator failed its step control."""


class DegenerateSteadyState(KpoError):
    """The Liouvillian null space is not one-dimensional."""


class ThresholdError(KpoError):
    """Parametric drive at or above the linear instability threshold."""


class SingularCovariance(KpoError):
    """Covariance matrix is numerically singular."""


class NonzeroMeanError(KpoError):
    """A zero-mean state was required but <b> differs from zero."""


class GridError(KpoError):
    """Temporal or phase-space grid cannot represent the requested object."""


class BelowThreshold(KpoError):
    """Poissonian-regime predictors require an above-threshold drive."""


class OptimizerStall(KpoError):
    """Filter optimization failed to improve on its starting point."""


class SteadyStateNotReached(KpoError):
    """Filter support starts before the cavity settles."""
