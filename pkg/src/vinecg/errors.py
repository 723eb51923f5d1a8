"""Exception hierarchy shared by every module of the package."""


class VineError(Exception):
    """Base class for all errors raised by vinecg."""


class DomainError(VineError, ValueError):
    """A copula parameter or Kendall's tau lies outside the admissible range."""


class NumericError(VineError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class DataError(VineError, ValueError):
    """Input data is malformed (non-finite values, constant columns, bad CSV)."""


class StructureError(VineError):
    """A vine structure is invalid or cannot be completed.

    Attributes:
        violations: list of human-readable violated conditions, possibly empty.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + ": " + "; ".join(self.violations)
        super().__init__(message)


class InfeasibleOrderError(VineError):
    """A sampling order implies a vertex that does not exist in the graph."""


class ModelFormatError(DataError):
    """A serialized model document could not be parsed or failed its schema."""
