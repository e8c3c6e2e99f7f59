"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: parse errors exit 1, precondition
violations exit 2, numerical failures exit 3.
"""


class BosonMomentsError(Exception):
    """Base class for all package errors."""


class PreconditionError(BosonMomentsError):
    """Input is well formed but violates an operation's precondition."""


class StructuralError(PreconditionError):
    """Dimension mismatch or malformed matrix data."""


class SignConventionError(PreconditionError):
    """Matrix is not a Laplacian-type stiffness matrix."""


class NotPSDError(PreconditionError):
    pass


class DegenerateStateError(PreconditionError):
    pass


class ScaleError(PreconditionError):
    """Requested object exceeds the configured desk-scale cap."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


class NotReconstructibleError(PreconditionError):
    pass


class PostselectionImpossibleError(PreconditionError):
    pass


class ParameterError(PreconditionError):
    pass


class NumericalError(BosonMomentsError):
    """Root bracketing failure, overflow, or an accuracy target missed."""


class InstanceParseError(BosonMomentsError):
    """Instance, graph or circuit file could not be parsed."""
