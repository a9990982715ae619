"""Exception types shared across the package."""


class FilamentError(Exception):
    """Base class for all filamentlab errors."""


class NonFiniteCoefficient(FilamentError):
    """Curvature or torsion evaluated to a non-finite value."""


class StepLimitExceeded(FilamentError):
    """An integration would exceed the configured step budget."""


class GridNonUniform(FilamentError):
    """Operation requires a uniform grid."""


class GridMismatch(FilamentError):
    """Inputs sampled on different grids."""


class GridTooCoarse(FilamentError):
    """Not enough samples for the requested stencil."""


class CurvatureBelowThreshold(FilamentError):
    """Torsion requested where curvature is below the resolvable threshold."""


class CurvatureVanishes(FilamentError):
    """Construction requires strictly positive curvature."""


class InvalidParameter(FilamentError):
    """Parameter outside the documented domain."""


class OutOfProfileRange(FilamentError):
    """Requested similarity variable lies outside the computed profile span."""


class EnergyDegenerate(FilamentError):
    """Frame reconstruction requires a positive conserved energy."""


class TimeSpanCrossesZero(FilamentError):
    """The 1/t-coefficient equation cannot be stepped across t = 0."""


class AliasingDetected(FilamentError):
    """Spectral tail carries too much energy for the run to be trusted."""


class ResampleOutOfRange(FilamentError):
    """Target grid extends beyond the rescaled source domain."""


class InsufficientTimeRange(FilamentError):
    """Trace extraction needs a wider span of stored times."""


class ConstraintViolated(FilamentError):
    """Input data fails a structural constraint."""
