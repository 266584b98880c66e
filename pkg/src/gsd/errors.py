"""Exception types shared across the toolkit.

The CLI maps ``ValidationError`` to exit code 2 and ``NumericError`` to
exit code 3.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class NumericError(RuntimeError):
    """A computation failed at run time (divergence, saturation, ...)."""


class SaturationError(NumericError):
    """Edge sampling hit the consecutive rejection limit."""

    def __init__(self, placed, budget, limit):
        self.placed = placed
        self.budget = budget
        self.limit = limit
        super().__init__(
            f"perturbation saturated: placed {placed} of {budget} edges "
            f"before {limit} consecutive rejections"
        )
