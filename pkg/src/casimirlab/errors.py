"""Exception hierarchy shared by every module.

The command-line front end maps each family onto a process exit code, so
library code raises the most specific class available.
"""


class CasimirError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParseError(CasimirError, ValueError):
    """Malformed input file or configuration document."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(CasimirError, ValueError):
    """Input values violate a documented invariant."""

    exit_code = 2


class ConfigurationError(CasimirError, ValueError):
    """Unsupported or inconsistent configuration choice."""

    exit_code = 2


class AlignmentError(ValidationError):
    """Theory and experiment grids do not line up."""

    def __init__(self, message, unmatched=()):
        self.unmatched = tuple(unmatched)
        super().__init__(message)


class DomainError(CasimirError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 3


class NearRootError(DomainError):
    """Windowed dispersion relation evaluated too close to a root of the window."""

    def __init__(self, message, xi=None, window_value=None, threshold=None):
        self.xi = xi
        self.window_value = window_value
        self.threshold = threshold
        super().__init__(message)


class AccuracyError(CasimirError, ArithmeticError):
    """Quadrature or series failed to reach the requested tolerance.

    ``estimate`` and ``error`` carry the best value obtained so far.
    """

    exit_code = 4

    def __init__(self, message, estimate=None, error=None):
        self.estimate = estimate
        self.error = error
        super().__init__(message)
