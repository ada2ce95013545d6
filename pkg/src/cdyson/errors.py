"""Exception hierarchy shared by all modules."""


class CDysonError(Exception):
    """Base class for every error raised by the package."""


class NotHermitian(CDysonError):
    pass


class ConvergenceFailure(CDysonError):
    pass


class DomainError(CDysonError):
    pass


class OverflowRisk(CDysonError):
    pass


class DimensionMismatch(CDysonError):
    pass


class NotOnContour(CDysonError):
    pass


class NonFiniteIntegrand(CDysonError):
    pass


class InsertionOutOfRange(CDysonError):
    pass


class CoincidentInsertions(CDysonError):
    pass


class NoFiniteShift(CDysonError):
    pass


class QuadratureNotConverged(CDysonError):
    pass


class HalfPlaneViolation(CDysonError):
    pass


class TruncationFailure(CDysonError):
    pass


class DegenerateGroundState(CDysonError):
    pass


class VanishingOverlap(CDysonError):
    pass


class SmallDenominator(CDysonError):
    pass


class ModeCollision(CDysonError):
    pass


class ZeroMode(CDysonError):
    pass


class ConfigError(CDysonError):
    pass


class CheckFailure(CDysonError):
    pass
