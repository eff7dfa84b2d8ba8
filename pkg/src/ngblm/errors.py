"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` and numerical
failures from :class:`NumericalError`; the CLI maps the two families to
exit codes 2 and 3.
"""


class BlmError(Exception):
    """Base class for all errors raised by ngblm."""


class ValidationError(BlmError, ValueError):
    """Bad input: shapes, domains, configuration."""


class NumericalError(BlmError, ArithmeticError):
    """A factorization or solve failed on otherwise valid input."""


class NotPositiveDefinite(NumericalError):
    """Cholesky pivot fell below the positivity threshold.

    Parameters
    ----------
    column : int
        1-based index of the failing pivot.
    """

    def __init__(self, column, message=None):
        self.column = column
        if message is None:
            message = f"matrix is not positive definite (pivot {column})"
        super().__init__(message)


class SingularDesign(NumericalError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NegativeSupport(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class EmptyModelList(ValidationError):
    pass


class IncompatibleComparison(ValidationError):
    pass


class LambdaFixed(ValidationError):
    """Operation needs an unknown precision but lambda was declared known."""


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValidationError):
    pass
