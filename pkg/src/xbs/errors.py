"""Exception types shared across the package."""


class PricingError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(PricingError, ValueError):
    """Bad inputs: broken invariants, malformed files, out-of-range queries."""


class StabilityError(PricingError):
    """The explicit time step violates the stability bound for the grid."""


class ConvergenceError(PricingError):
    """An iterative solve stopped before reaching the residual tolerance."""
