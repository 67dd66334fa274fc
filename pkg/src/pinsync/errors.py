"""Exception hierarchy shared by every pinsync module.

Each exception carries a short machine-greppable ``code`` that the CLI
prints as the prefix of its single-line diagnostic.
"""


class PinsyncError(Exception):
    code = "E_PINSYNC"

    def __init__(self, message, *, code=None, path=None, line=None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.path = path
        self.line = line

    def diagnostic(self):
        where = ""
        if self.path:
            where = f" at {self.path}"
            if self.line is not None:
                where += f" (line {self.line})"
        return f"{self.code}{where}: {self}"


class ValidationError(PinsyncError, ValueError):
    """Malformed input or a violated domain invariant."""

    code = "E_VALIDATION"


class DimensionError(ValidationError):
    code = "E_DIMENSION"


class PreconditionError(ValidationError):
    """An operation's precondition does not hold (e.g. a tie in average speeds)."""

    code = "E_PRECONDITION"


class InsufficientDataError(ValidationError):
    code = "E_INSUFFICIENT_DATA"


class DegenerateTraceError(ValidationError):
    code = "E_DEGENERATE_TRACE"


class NumericalError(PinsyncError, ArithmeticError):
    code = "E_NUMERIC"


class ConvergenceError(NumericalError):
    """Iterative kernel failed to converge; ``partial`` holds what was found."""

    code = "E_CONVERGENCE"

    def __init__(self, message, *, partial=None, iterations=None, **kw):
        super().__init__(message, **kw)
        self.partial = partial
        self.iterations = iterations


class MatrixOverflowError(NumericalError, OverflowError):
    code = "E_OVERFLOW"
