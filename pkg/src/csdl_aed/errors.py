"""Exception hierarchy shared by all modules."""


class CsdlError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(CsdlError, ValueError):
    pass


class ConfigError(CsdlError, ValueError):
    pass


class DegenerateInputError(CsdlError, ValueError):
    pass


class InputError(CsdlError, ValueError):
    pass


class FormatError(CsdlError, ValueError):
    pass


class ParseError(FormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FingerprintMismatch(CsdlError):
    """A classifier model was trained against a different dictionary."""
