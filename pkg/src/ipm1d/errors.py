"""Exception types shared across the library."""


class IPM1DError(Exception):
    """Base class for all library-specific errors."""


class DomainError(IPM1DError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResolutionError(IPM1DError, ValueError):
    """The grid is too coarse to carry out the requested operation."""


class UnsupportedOrderError(IPM1DError, ValueError):
    """A derivative order beyond the supported range was requested."""


class ParityError(IPM1DError, ValueError):
    """An operation received a function with the wrong parity."""


class PreconditionError(IPM1DError, ValueError):
    """A documented precondition of an operation was violated."""


class DegenerateDomainError(IPM1DError, ValueError):
    """The stream equation is not uniquely solvable on this domain (L too
    close to pi/2)."""


class NoConvergenceError(IPM1DError, RuntimeError):
    """An iterative solver failed to converge."""


class NoRootError(IPM1DError, RuntimeError):
    """Profile continuation reached pi/2 without the stream function
    crossing zero."""


class MonotonicityError(IPM1DError, RuntimeError):
    """The density drifted negative / non-monotone during continuation."""


class StepSizeError(IPM1DError, ValueError):
    """A requested time step violates the transport stability guard."""


class BlowupReached(IPM1DError, RuntimeError):
    """The physical-frame evolution hit the blow-up detection thresholds.

    Not a bug: finite-time blow-up is the expected behaviour near t = 1.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ImpossibleTargetError(IPM1DError, ValueError):
    """A shooting target that is structurally unattainable (>= pi/2)."""


class BracketError(IPM1DError, ValueError):
    """A root-finding bracket does not straddle the target."""
