"""Exception types raised by the capacity and simulation routines."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class AccuracyError(ArithmeticError):
    """A numerical routine could not reach its requested accuracy."""


class ConditioningError(ArithmeticError):
    """A finite-difference step is too small for the available accuracy."""
