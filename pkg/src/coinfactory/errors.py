"""Exception types shared across the package."""


class CoinFactoryError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(CoinFactoryError, ValueError):
    """A parameter is outside its documented range."""


class InconsistentSeriesError(CoinFactoryError):
    """Coefficient mass requested past the point where the series already sums to 1.

    Raised when deriving stop probabilities: the denominator 1 - sum_{j<k} c_j is
    exactly zero while c_k > 0, which no valid coefficient sequence can produce.
    """


class InsufficientPrecisionError(CoinFactoryError):
    """An interval-backed quantity could not be resolved at the precision ceiling."""


class TruncationLimitError(CoinFactoryError):
    """The two-phase baseline sampler hit its input cap before stopping."""

    def __init__(self, cap):
        super().__init__(f"baseline phase-1 draw exceeded the input cap ({cap})")
        self.cap = cap


class TableDepthError(CoinFactoryError):
    """A sampler needed stop probabilities past the supported table depth."""


class ExpressionError(CoinFactoryError, ValueError):
    """Factory/series expression failed to parse; carries the offending position."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position
