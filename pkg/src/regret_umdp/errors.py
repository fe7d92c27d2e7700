"""Exception hierarchy shared by every module."""


class UmdpError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(UmdpError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid UMDP")


class StructureError(UmdpError, KeyError):
    """A required (state, action) entry or table slot is missing."""

    def __str__(self):
        return Exception.__str__(self)


class DivergenceError(UmdpError):
    """Fixed-point iteration failed to converge (dead end or improper model)."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)


class ImproperPolicyError(DivergenceError):
    """The evaluated policy does not reach the goal with probability one."""


class NonConvergenceError(UmdpError):
    def __init__(self, message, delta=None):
        self.delta = delta
        super().__init__(message)


class SearchBudgetExceeded(UmdpError):
    """Inner branch-and-bound ran out of nodes; carries the best incumbent."""

    def __init__(self, message, table=None, objective=None):
        self.table = table
        self.objective = objective
        super().__init__(message)


class CoverageError(UmdpError):
    def __init__(self, anchor, state, t):
        self.anchor, self.state, self.t = anchor, state, t
        super().__init__(f"option anchored at {anchor} has no action for state {state} at step {t}")


class PlannerTimeout(UmdpError):
    pass
