"""Exception hierarchy shared across the package."""


class EdForecastError(Exception):
    """Base class for all package errors."""


class ContractError(EdForecastError):
    """A caller violated a documented precondition."""


class DataQualityError(EdForecastError):
    """Input data breaks an invariant (gaps, duplicates, impossible values)."""


class ParseError(EdForecastError):
    """A file could not be parsed; message carries the line number."""


class CoverageError(EdForecastError):
    """A date range required by an operation is not covered by its inputs."""


class FitError(EdForecastError):
    """A model fit failed; may carry a partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConvergenceError(FitError):
    """An iterative solver exhausted its budget; carries a gap report."""
