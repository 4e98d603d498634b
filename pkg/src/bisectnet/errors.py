"""Exception types shared across the package."""


class BisectnetError(Exception):
    """Base class for all package-specific errors."""


class PreconditionError(BisectnetError, ValueError):
    """An operation was called on inputs that violate its stated contract."""


class ProtocolError(BisectnetError, RuntimeError):
    """A simulation step could not be carried out (degenerate belief, overflow)."""


class EnumerationError(BisectnetError, ValueError):
    """Exact enumeration was requested for a network too large to enumerate."""


class SamplingError(BisectnetError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class SearchExhaustedError(BisectnetError, RuntimeError):
    """A bounded search (e.g. for a contracting matrix power) found nothing."""


class ConvergenceError(BisectnetError, RuntimeError):
    """An iterative numeric routine failed to converge."""
