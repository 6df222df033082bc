"""Exception types shared by the lab's engines."""


class UsageError(ValueError):
    """A caller violated a documented precondition (bad grid, empty probe, ...)."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values."""
