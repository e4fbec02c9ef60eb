"""Exception types raised by the extractor lab services."""

from datetime import datetime
from typing import Optional


class LabError(ValueError):
    """Base error for construction, parameter and measurement failures."""

    error_type = "LAB_ERROR"

    def __init__(self, message: str, error_type: Optional[str] = None,
                 original_error: Optional[Exception] = None):
        """
        Initialize a lab error.

        Args:
            message: Human-readable error message
            error_type: Machine code; defaults to the class code
            original_error: Underlying exception if any
        """
        super().__init__(message)
        self.message = message
        if error_type is not None:
            self.error_type = error_type
        self.original_error = original_error
        self.timestamp = datetime.utcnow()

    def __str__(self):
        return self.message

    def to_detail(self) -> dict:
        """Detail body used by the HTTP layer."""
        return {
            "code": self.error_type,
            "message": self.message,
            "timestamp": self.timestamp.isoformat(),
        }


class LengthMismatchError(LabError):
    """Vector, seed, bundle, arity or split lengths disagree."""
    error_type = "LENGTH_MISMATCH"


class IndexOutOfRangeError(LabError, IndexError):
    """An index falls outside [0, length)."""
    error_type = "INDEX_OUT_OF_RANGE"


class ParameterError(LabError):
    """A parameter violates its domain."""
    error_type = "PARAMETER_ERROR"


class InfeasibleError(LabError):
    """A greedy search exhausted its candidates."""
    error_type = "INFEASIBLE"


class BudgetExceededError(LabError):
    """An exact enumeration would exceed its configured budget."""
    error_type = "BUDGET_EXCEEDED"


class VerificationError(LabError):
    """An artifact failed its own invariant check."""
    error_type = "VERIFICATION_FAILED"
