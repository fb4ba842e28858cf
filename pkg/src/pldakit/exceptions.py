"""Exception hierarchy shared across the toolkit.

``DataError`` covers anything wrong with user-supplied inputs (bad files,
violated preconditions); ``NumericalError`` covers failures of the math
itself (degenerate matrices, eigensolver breakdown).  The CLI maps the two
branches to distinct exit codes.
"""


class PldakitError(Exception):
    """Base class for all toolkit errors."""


class DataError(PldakitError, ValueError):
    """Malformed input file or violated data precondition."""


class NumericalError(PldakitError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""


class DegenerateMatrixError(NumericalError):
    """A matrix required to be (semi)definite is not, even after flooring."""
