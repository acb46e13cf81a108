"""Exception types shared across the package."""


class IsccError(Exception):
    """Base class for all package errors."""


class DomainError(IsccError, ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(DomainError):
    """A root search was given an interval without a sign change."""


class AliasingError(DomainError):
    """A synthetic tone sits at or above the Nyquist frequency."""


class FitError(IsccError, ValueError):
    """Not enough data to fit class statistics."""


class ConfigError(IsccError, ValueError):
    """Malformed experiment configuration or unknown scheme label."""


class NoGainError(IsccError):
    """The gating detector cannot save compute for these statistics."""


class InfiniteDelay(IsccError):
    """A task received zero bandwidth share or zero compute."""


class BoundError(IsccError):
    """The edge server cannot serve the device tasks at any sampling rate."""


class InfeasibleError(IsccError):
    """A resource constraint cannot be met.

    ``constraint`` names the failing constraint (``"communication"``,
    ``"computation"`` or ``"sensing_delay"``) and ``deficit`` says by how
    much it is violated, in that constraint's own units.
    """

    def __init__(self, constraint, deficit, message=None):
        self.constraint = constraint
        self.deficit = deficit
        super().__init__(message or f"{constraint} infeasible (deficit {deficit:.6g})")
