"""Exception types raised by the library."""


class SqueezeError(Exception):
    """Base class for all library errors."""


class FieldRangeError(SqueezeError, IndexError):
    """A tabulated field was evaluated outside its stored range."""


class SingularSeriesError(SqueezeError, ZeroDivisionError):
    """Reciprocal of a series whose leading coefficient vanishes."""


class SeriesDomainError(SqueezeError, ValueError):
    """A series operation was applied outside its domain (sqrt, exp, log)."""


class NotExpandableError(SqueezeError, ValueError):
    """The field term has no half-power expansion relative to the squeezing weight."""


class DegenerateRootsError(SqueezeError, ValueError):
    """Characteristic roots coincide or a Birkhoff denominator vanishes."""


class InconsistencyError(SqueezeError, RuntimeError):
    """Internal consistency check of the formal-solution coefficients failed."""


class InconclusiveError(SqueezeError, RuntimeError):
    """A numerical test could not decide within its configured margin."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ValidationError(SqueezeError, ValueError):
    """Invalid user input (non-unitary matrix, bad parameters...)."""


class ResourceError(SqueezeError, MemoryError):
    """Requested computation exceeds the configured size limit."""
