class ScatMeshError(Exception):
    """Base class for all library errors."""


class DomainError(ScatMeshError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CoincidentPointError(DomainError):
    """Two points that must be distinct coincide (singular kernel)."""


class PreconditionError(ScatMeshError, ValueError):
    """A documented precondition of an operation does not hold."""


class SingularSystemError(ScatMeshError):
    """Linear system too ill-conditioned to solve reliably."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ProvenanceError(ScatMeshError):
    """Input files do not belong to the configuration they are used with."""
