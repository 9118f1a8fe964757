"""Exception types shared across the package."""


class SupercdError(Exception):
    """Base class for package errors."""


class UnknownConceptError(SupercdError, LookupError):
    """A concept id is not present in the ontology."""

    def __init__(self, concept_id: str):
        super().__init__(f"unknown concept id: {concept_id!r}")
        self.concept_id = concept_id


class OntologyValidationError(SupercdError, ValueError):
    """An ontology violates its structural invariants."""


class ParameterError(SupercdError, ValueError):
    """Operation parameters are invalid or infeasible."""


class DataError(SupercdError, ValueError):
    """Input data is empty, insufficient, or malformed."""


class EncodingError(SupercdError, ValueError):
    """A token sequence cannot be encoded."""


class ShapeMismatchError(SupercdError, ValueError):
    """Vector dimensions do not agree."""


class NumericError(SupercdError, ArithmeticError):
    """A numeric computation hit non-finite values."""


class InsufficientConceptsError(SupercdError, ValueError):
    """Too few common concepts to build superposition sets."""


class ConflictError(SupercdError, ValueError):
    """An operation collides with one already applied (e.g. double-submit)."""


class SessionStateError(SupercdError, ValueError):
    """A session operation conflicts with the session's state."""


class NotFoundError(SupercdError, LookupError):
    """A referenced artifact or session does not exist."""
