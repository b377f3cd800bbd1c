"""Exception hierarchy shared across the pipeline."""


class ForecastError(Exception):
    """Base class for all errors raised by dhforecast."""


class ValidationError(ForecastError, ValueError):
    """Invalid configuration or arguments."""


# timeseries
class EmptyIntersection(ForecastError):
    pass


class TooShort(ForecastError):
    pass


class DuplicateTimestamp(ValidationError):
    pass


# features
class InsufficientHistory(ForecastError):
    pass


class MissingForecast(ForecastError):
    pass


# experts
class InvalidSpec(ValidationError):
    pass


class Singular(ForecastError):
    pass


class NonConvergence(ForecastError):
    pass


class NonFinite(ForecastError):
    pass


class KindMismatch(ForecastError):
    pass


# aggregation / backtest
class ZeroActual(ForecastError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyRange(ForecastError):
    pass


class ZeroVariance(ForecastError):
    pass
