"""Exception types shared across the package."""


class BiphotonError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(BiphotonError, ValueError):
    pass


class CalibrationError(BiphotonError):
    pass


class ResolutionError(BiphotonError):
    pass


class FitError(BiphotonError):
    """A least-squares fit did not converge.

    ``fallback`` carries a moments-based estimate when the caller can use one.
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class EmptyDataError(BiphotonError):
    pass


class ParseError(BiphotonError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class ConfigError(BiphotonError):
    pass


class RangeError(BiphotonError):
    pass
