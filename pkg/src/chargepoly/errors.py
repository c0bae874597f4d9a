class ChargePolyError(Exception):
    """Base class for errors raised by this package."""


class BudgetExceeded(ChargePolyError):
    """Raised when an exact computation would exceed its configured budget."""

    def __init__(self, what: str, required: int | float, budget: int | float):
        self.required = required
        self.budget = budget
        super().__init__(f"{what}: needs {required:.6g}, budget is {budget:.6g}")


class AcceptanceTooLow(ChargePolyError):
    """Rejection sampler gave up before collecting enough accepted samples."""

    def __init__(self, tries: int, accepted: int):
        self.tries = tries
        self.accepted = accepted
        self.rate = accepted / tries if tries else 0.0
        super().__init__(
            f"acceptance-too-low: {accepted} accepted in {tries} tries "
            f"(empirical acceptance rate {self.rate:.3g})"
        )


class ESSWarning(UserWarning):
    """Effective sample size of a weighted estimate is too small to trust."""


class GridResolutionWarning(UserWarning):
    """A density-grid representation was used where an exact one is unavailable."""
