"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(ValueError):
    """Array dimensions do not match the expected layout."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value.

    ``stage`` names the step where it happened (e.g. ``"hidden"``).
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
