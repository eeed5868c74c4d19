"""Exception hierarchy shared by all occafs modules."""


class OCCAError(Exception):
    """Base class for every error raised by occafs."""


class InvalidInputError(OCCAError, ValueError):
    """Malformed or out-of-contract input (shapes, NaNs, ranges)."""


class InvalidLabelsError(InvalidInputError):
    pass


class RankDeficiencyError(InvalidInputError):
    """The scatter matrix A violates rank(A) > n - k."""


class DatasetFormatError(InvalidInputError):
    """A dataset file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidSplitError(InvalidInputError):
    pass


class NumericalError(OCCAError, ArithmeticError):
    """A computation hit a singular or undefined configuration."""


class DegenerateDenominatorError(NumericalError):
    """tr(P^T A P) vanished."""


class SingularityError(NumericalError):
    """eps0 = 0 and some row of P is (numerically) zero."""


class UndefinedResidualError(NumericalError):
    """The KKT residual normalization is not positive."""


class InvariantViolationError(OCCAError, RuntimeError):
    """A guaranteed invariant failed; this indicates a bug."""


class MonotonicityError(InvariantViolationError):
    """An OCCA solver produced a decreasing objective."""
