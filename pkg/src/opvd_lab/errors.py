"""Exception hierarchy shared by all opvd_lab modules."""


class OpvdError(Exception):
    """Base class for every error raised by the library."""


class InvalidGeometryError(OpvdError, ValueError):
    """Radii, boxes or charts that cannot describe a valid region."""


class UncoveredPointError(OpvdError):
    """A cover leaves part of the domain without any bump."""

    def __init__(self, point, message=None):
        self.point = point
        super().__init__(message or f"domain point {point!r} is not covered")


class ResolutionError(OpvdError):
    """A grid is too coarse for the function it samples."""

    def __init__(self, message, required_spacing=None):
        self.required_spacing = required_spacing
        super().__init__(message)


class DimensionMismatchError(OpvdError, ValueError):
    pass


class NumericalInconsistencyError(OpvdError):
    """Two independent evaluation routes disagree beyond tolerance."""

    def __init__(self, message, deviation=None):
        self.deviation = deviation
        super().__init__(message)


class PreconditionError(OpvdError, ValueError):
    pass


class ChartDomainError(OpvdError):
    pass


class IncompatibilityError(OpvdError):
    """Local pieces disagree on an overlap."""

    def __init__(self, message, point=None, deviation=None):
        self.point = point
        self.deviation = deviation
        super().__init__(message)


class CoverageError(OpvdError):
    pass


class NonIsometryError(OpvdError, ValueError):
    pass


class DivergenceError(OpvdError):
    pass


class AbsoluteContinuityError(OpvdError):
    def __init__(self, witness, message=None):
        self.witness = witness
        super().__init__(message or f"nu charges {witness!r} where mu vanishes")


class UnsupportedError(OpvdError):
    pass


class SingularMapError(OpvdError):
    pass


class InvalidTensorError(OpvdError, ValueError):
    pass


class QuadratureError(OpvdError):
    def __init__(self, message, trace=None):
        self.trace = trace or []
        super().__init__(message)


class GaugeDegenerateError(OpvdError):
    """Gauge condition fails to fix the orbit (Gribov-type degeneracy)."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(message)


class DegenerateOrbitError(OpvdError):
    pass


class PoleError(OpvdError):
    pass


class SingularMomentumError(OpvdError, ValueError):
    pass


class NormalizationError(OpvdError, ValueError):
    pass


class UnsupportedAlgebraError(OpvdError, ValueError):
    pass


class OffShellError(OpvdError, ValueError):
    pass


class IndexRangeError(OpvdError, IndexError):
    pass


class UsageError(OpvdError):
    pass


class NothingToReportError(OpvdError):
    pass
