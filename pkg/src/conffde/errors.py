"""Exception types shared across the package."""


class ConffdeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ConffdeError):
    """Malformed expression text; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset
        self.message = message


class DomainError(ConffdeError):
    """Evaluation requested outside the mathematical domain of an operation."""


class ConvergenceError(ConffdeError):
    """An iterative numerical scheme did not stabilize within its budget."""


class QuadratureError(ConffdeError):
    """Adaptive quadrature could not meet tolerance within the subdivision budget."""


class StepUnderflowError(ConffdeError):
    """The step controller drove the step size below the allowed minimum."""


class FundamentalityError(ConffdeError):
    """A constructed solution set failed its Wronskian normalization check."""


class SingularSystemError(ConffdeError):
    """The Wronskian matrix of a candidate set is numerically singular."""
