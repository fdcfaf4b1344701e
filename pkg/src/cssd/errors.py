"""Exception hierarchy shared by every module."""


class CSSDError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CSSDError, ValueError):
    """Malformed input: wrong shape, non-finite entries, bad parameter."""


class SizeError(CSSDError, ValueError):
    """A result would exceed the configured size cap."""


class DomainError(CSSDError, ValueError):
    """A calculator was evaluated outside the domain of its formula."""


class ConditioningError(CSSDError, ArithmeticError):
    """The smooth design A·B is (numerically) rank deficient."""

    def __init__(self, message, sigma_min):
        super().__init__(message)
        self.sigma_min = sigma_min


class DivergenceError(CSSDError, ArithmeticError):
    """The solver produced a non-finite objective."""


class FeasibilityError(CSSDError, ValueError):
    """The requested residual bound is below the smallest achievable one."""

    def __init__(self, message, min_residual):
        super().__init__(message)
        self.min_residual = min_residual


class UndefinedMetricError(CSSDError, ZeroDivisionError):
    """A metric's denominator is zero (e.g. FPR with no normal pixels)."""


class ParseError(CSSDError, ValueError):
    """A file could not be parsed; carries the offending line or byte offset."""

    def __init__(self, message, *, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset
