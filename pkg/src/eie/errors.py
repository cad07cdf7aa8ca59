class EIEError(Exception):
    pass


class FormatError(EIEError, ValueError):
    """Malformed encoded matrix or container."""


class CapacityError(EIEError):
    """A hardware capacity limit (pointer width, buffers) was exceeded."""


class AccumulatorOverflowError(EIEError, OverflowError):
    pass


class ConfigurationError(EIEError, ValueError):
    pass
