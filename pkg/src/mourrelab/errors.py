"""Exception types raised across the package."""


class ArgumentError(ValueError):
    """An argument is outside its documented domain."""


class UnsupportedCombinationError(ValueError):
    """The requested operator does not exist for this box geometry."""


class CapacityError(RuntimeError):
    """A problem exceeds a configured size limit or does not fit the box."""


class PlacementError(ValueError):
    """A Weyl vector cannot be placed inside a plateau region."""

    def __init__(self, message, max_feasible=None):
        super().__init__(message)
        self.max_feasible = max_feasible


class NumericError(ArithmeticError):
    """An iterative method failed to converge or a bound was violated."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
