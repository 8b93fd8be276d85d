"""Exception and warning types shared across the package."""


class OralabError(Exception):
    """Base class for all errors raised by oralab."""


class GridMismatch(OralabError, ValueError):
    pass


class InsufficientMass(OralabError, ValueError):
    """A cut was requested that is larger than the available mass."""


class InfeasibleCut(OralabError):
    """Barrier step could not cut the scheduled mass (admissibility violated)."""


class DeltaTooLarge(OralabError, ValueError):
    pass


class SandwichViolation(OralabError):
    """Upper barrier failed to dominate the lower one modulo the certified gap."""

    def __init__(self, step, excess, message=None):
        self.step = step
        self.excess = excess
        super().__init__(message or f"sandwich violated at step {step} by {excess:.3e}")


class ValidityWindowExceeded(OralabError, ValueError):
    pass


class AdmissibilityError(OralabError, ValueError):
    """Data tuple does not satisfy the model's admissibility conditions."""


class PopulationUnderflow(OralabError):
    pass


class CouplingPreconditionViolated(OralabError, ValueError):
    pass


class NoSnapshotAtTime(OralabError, KeyError):
    pass


class EmptyWindow(OralabError, ValueError):
    pass


class SupportEscapesGrid(OralabError, ValueError):
    pass


class InvariantViolation(OralabError):
    """A hard particle-level invariant failed during simulation."""


class ConfigError(OralabError, ValueError):
    pass


class KernelWiderThanDomain(UserWarning):
    pass


class TruncationLoss(UserWarning):
    pass


class BarrierDiagnostic(UserWarning):
    """Soft support-bound diagnostic failed (logged, never fatal)."""
