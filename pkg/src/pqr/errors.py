"""Exception types shared across the package."""


class PqrError(Exception):
    """Base class for all solver errors."""


class MemoryGuardError(PqrError):
    """An operation would allocate more entries than the configured budget."""


class DimensionMismatchError(PqrError, ValueError):
    """Operand shapes are inconsistent."""


class SchurConvergenceError(PqrError):
    """The QR iteration backing the Schur decomposition did not converge."""


class EigenvalueSumError(PqrError):
    """A diagonal pivot (a sum of eigenvalues) is numerically zero, so the
    Kronecker-sum system is singular or nearly so."""


class NonRealSolutionError(PqrError):
    """The back-transformed solution of a real system kept a non-negligible
    imaginary part."""


class UnstabilizablePairError(PqrError):
    """(A, B) admits no stabilizing Riccati solution."""


class RefinementStagnationError(PqrError):
    """Newton refinement of the Riccati solution stalled above the residual
    target."""


class MissingCoefficientError(PqrError):
    """A required lower-degree coefficient has not been computed yet."""


class ConfigError(PqrError):
    """Invalid run configuration."""
