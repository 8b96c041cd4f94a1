"""Exception hierarchy for subheat."""


class SubheatError(Exception):
    """Base class for all subheat errors."""


class InvalidModelError(SubheatError, ValueError):
    pass


class ConnectivityError(SubheatError):
    pass


class InsufficientScalesError(SubheatError):
    pass


class NumericalFailureError(SubheatError):
    """Raised when a numerical routine fails; carries a residual report."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvalidMultiIndexError(SubheatError, ValueError):
    pass


class MultiplierDomainError(SubheatError, ValueError):
    pass


class DomainError(SubheatError, ValueError):
    pass


class QuadratureError(SubheatError):
    pass


class SymmetryError(SubheatError, ValueError):
    pass


class FrameConstructionError(SubheatError):
    pass


class ResolutionError(SubheatError):
    pass


class PreconditionError(SubheatError, ValueError):
    pass


class CorruptCacheError(SubheatError):
    pass


class StaleCacheError(SubheatError):
    pass


class ConfigError(SubheatError, ValueError):
    """Configuration error, tagged with the offending line number (1-based)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
