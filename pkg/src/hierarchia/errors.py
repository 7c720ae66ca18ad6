"""Shared exception types."""


class InvalidParameterError(ValueError):
    """A parameter is outside the domain of the requested operation."""


class ResourceBudgetError(RuntimeError):
    """An event or population budget was exceeded.

    Carries whatever partial result was available when the budget tripped.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SingularSystemError(RuntimeError):
    """A linear system that should be nonsingular was not (recurrent truncation)."""
