"""Exception types shared across the package."""


class FoveateError(Exception):
    """Base class for all package errors."""


class DegenerateParams(FoveateError):
    """Raised when Mobius coefficients have a (near-)zero determinant."""


class OutOfBounds(FoveateError):
    """Raised for pixel coordinates outside the image rectangle."""


class DimensionMismatch(FoveateError):
    """Raised when two images that must share dimensions do not."""


class MissingPlugin(FoveateError):
    """Raised when a metric weight is nonzero but no plugin is configured."""


class ZeroVector(FoveateError):
    """Raised when normalizing a (near-)zero embedding vector."""


class LengthMismatch(FoveateError):
    """Raised when two vectors or lists that must share length do not."""


class ZeroBaseline(FoveateError):
    """Raised when a ratio metric is requested against a zero baseline."""


class OracleError(FoveateError):
    """Raised when the oracle reports an error or violates the protocol."""


class OracleUnavailable(OracleError):
    """Raised when the oracle transport fails.

    May carry a ``partial_result`` attribute with the adaptation state
    accumulated before the failure.
    """

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class HarnessError(FoveateError):
    """Raised when an experiment run cannot proceed (bad data, too many failures)."""
