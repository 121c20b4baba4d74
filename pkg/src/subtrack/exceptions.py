"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument violates a documented precondition (shape, range, dtype)."""


class DegenerateUpdateError(ArithmeticError):
    """Update is undefined because a required vector norm is (numerically) zero."""


class RankLossError(ArithmeticError):
    """A basis lost column rank and cannot be re-orthonormalized."""


class FileFormatError(ValueError):
    """A basis or stream file failed to parse; message carries the line number."""


class StreamProcessingError(RuntimeError):
    """A tracker failed mid-stream.

    Carries the zero-based index of the failing observation and the trace
    records accumulated before the failure, so callers can flush partial
    results.
    """

    def __init__(self, step_index, records, message=""):
        self.step_index = step_index
        self.records = records
        super().__init__(message or f"tracker update failed at stream index {step_index}")
