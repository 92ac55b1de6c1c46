"""Exception hierarchy shared by every fieldmap module."""


class FieldmapError(Exception):
    """Base class for all errors raised by fieldmap."""


class MalformedHeader(FieldmapError):
    pass


class DimensionMismatch(FieldmapError):
    pass


class ValueOutOfRange(FieldmapError):
    pass


class IoFailure(FieldmapError):
    pass


class InvalidGeoTransform(FieldmapError):
    pass


class GeographicCRSError(FieldmapError):
    """Raised when an area is requested on a grid whose CRS is in degrees."""


class ThresholdOutOfRange(FieldmapError):
    pass


class GridMismatch(FieldmapError):
    pass


class BadClassIndex(FieldmapError):
    pass


class RotatedGridUnsupported(FieldmapError):
    pass


class OpenRing(FieldmapError):
    pass


class UnknownLabel(FieldmapError):
    pass


class EmptyInput(FieldmapError):
    pass


class YearOrder(FieldmapError):
    pass


class InsufficientYears(FieldmapError):
    pass


class SpecInvalid(FieldmapError):
    pass


class ConfigError(FieldmapError):
    pass
