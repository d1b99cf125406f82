"""Exception hierarchy shared across the package."""


class BarylabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BarylabError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DegenerateSetError(BarylabError, ValueError):
    """Candidate set fails a construction invariant (e.g. non-positive width)."""


class InfeasibleVolumeError(BarylabError, ValueError):
    """Requested Gaussian volume cannot be realized by the configuration."""


class QuadratureRefinementError(BarylabError, RuntimeError):
    """Grid too coarse: estimated quadrature error exceeds the tolerance."""


class ConsistencyError(BarylabError, RuntimeError):
    """An internal cross-check (phase switch, convergence flag) failed."""
