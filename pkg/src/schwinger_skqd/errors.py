"""Exception hierarchy shared by the library and the command line front end."""


class SkqdError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(SkqdError, ValueError):
    exit_code = 2


class InfeasibleError(SkqdError):
    """A requested computation exceeds the memory budget."""

    exit_code = 3

    def __init__(self, message, required_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes


class EigensolverError(SkqdError, ArithmeticError):
    """The iterative eigensolver did not reach the requested residual."""

    exit_code = 4

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class CountsParseError(SkqdError, ValueError):
    exit_code = 5

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class CountsSchemaError(CountsParseError):
    pass


class DetectionError(SkqdError):
    """No unique particle-number crossing could be located in a scan."""

    exit_code = 6


class FitError(SkqdError):
    exit_code = 7
