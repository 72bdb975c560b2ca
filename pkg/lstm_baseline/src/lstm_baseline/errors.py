"""Exception types for the forecasting baseline."""


class BaselineError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(BaselineError, ValueError):
    """An input, configuration value, or file violates a documented contract."""


class DivergenceError(BaselineError):
    """Training produced a non-finite loss and was aborted."""
