"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, PhysicsError -> 3,
ConvergenceError -> 4.
"""


class TrapcavError(Exception):
    """Base class for all package errors."""


class ConfigError(TrapcavError):
    """Invalid scenario/layout/preset input (schema, units, ranges)."""


class PhysicsError(TrapcavError):
    """Physically invalid request (domain errors, unstable operating points)."""


class ConvergenceError(TrapcavError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best


class UnstableOperatingPointError(PhysicsError):
    """Requested trap configuration has no stable secular minimum."""


class UnphysicalConfigurationError(PhysicsError):
    """Ion configuration collapsed below the hard-core distance."""


class NonAdiabaticRampError(ConvergenceError):
    """Quasi-static tracking failed (ordering lost or no convergence)."""

    def __init__(self, message, step=None, **kw):
        super().__init__(message, **kw)
        self.step = step


class BetaOutOfRangeError(PhysicsError):
    """Sideband/carrier ratio outside the invertible modulation-index range."""


class SearchBoxError(ConvergenceError):
    """Minimizer ended on the search-box boundary; widen the box."""
