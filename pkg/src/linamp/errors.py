"""Exception hierarchy shared by every module."""


class LinampError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LinampError, ValueError):
    """A parameter lies outside the allowed domain."""


class TruncationError(LinampError):
    """The Fock cutoff cannot hold the state without visible leakage."""

    def __init__(self, message, tail_mass=None, dim=None):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.dim = dim


class DimensionMismatch(LinampError, ValueError):
    pass


class StateError(LinampError, ValueError):
    """A matrix violates the density-matrix invariants."""


class ToleranceError(LinampError):
    """Adaptive step control failed."""


class DegenerateInput(LinampError, ValueError):
    pass


class Unsupported(LinampError):
    pass


class InconsistentGain(LinampError):
    pass


class NotPhasePreserving(LinampError):
    pass


class NoAmplitudeRecord(LinampError):
    pass


class GuardExceeded(LinampError):
    """A quantum trajectory exceeded its jump budget."""
