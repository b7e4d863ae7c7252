"""Exception types shared across the package."""


class FcidError(Exception):
    """Base class for all errors raised by fcid."""


class DomainError(FcidError, ValueError):
    """Current is outside the region where a polarization model is defined."""


class DimensionError(FcidError, ValueError):
    pass


class NotPositiveError(FcidError, ValueError):
    pass


class RangeError(FcidError, ValueError):
    pass


class NumericalError(FcidError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyDataError(FcidError, ValueError):
    pass


class ParseError(FcidError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrderError(FcidError, ValueError):
    pass


class ConfigError(FcidError, ValueError):
    pass

