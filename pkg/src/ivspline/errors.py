"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: data/schema problems exit 2, numerical
solver failures exit 3, an infeasible monotonicity program exits 4.
"""


class IvsplineError(Exception):
    """Base class for all library errors."""


class SchemaError(IvsplineError):
    """A required column is missing from an input file."""


class ParseError(IvsplineError):
    """A cell could not be parsed as a finite real number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SizeError(IvsplineError):
    """The dataset is too small for the requested operation."""


class DegenerateInstrumentError(IvsplineError):
    """An instrument column is constant and cannot be standardized."""


class CollinearityError(IvsplineError):
    """The linear part of the design is rank deficient (fewer than two distinct z values)."""


class SingularKernelError(IvsplineError):
    """The instrument weight matrix stayed non-positive-definite past the jitter cap."""


class ConditioningError(IvsplineError):
    """A linear solve produced non-finite output."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class SelectionError(IvsplineError):
    """Cross-validation could not rank any candidate regularization value."""


class InfeasibleConstraintsError(IvsplineError):
    """No simplex weight vector satisfies the monotonicity constraints."""

    def __init__(self, message, worst_constraint=None):
        super().__init__(message)
        self.worst_constraint = worst_constraint


class SolverStallError(IvsplineError):
    """The interior-point solver hit its iteration cap before converging."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
