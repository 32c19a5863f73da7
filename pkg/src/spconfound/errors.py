"""Exception types shared across the package."""


class SpconfoundError(Exception):
    """Base class for all package-specific errors."""


class DuplicateSiteError(SpconfoundError):
    """Two or more sampling locations coincide."""


class NumericalError(SpconfoundError):
    """A numerical quantity became non-finite or a matrix lost definiteness."""


class FactorizationError(NumericalError):
    """Matrix square-root factorization failed even after jitter escalation."""


class RankError(SpconfoundError):
    """A design or kernel matrix is rank deficient where full rank is required."""


class CalibrationError(SpconfoundError):
    """The confounder scale cannot be calibrated to the requested bias."""


class ModeSearchError(SpconfoundError):
    """Posterior mode search did not converge for a candidate model."""


class UsageError(SpconfoundError):
    """An operation was invoked with arguments that make no sense (e.g. empty chain)."""


class IngestError(SpconfoundError):
    """A data file failed validation; message carries row/column context."""
