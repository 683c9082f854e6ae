"""Exception hierarchy shared across solvers, simulator and service."""


class EdgeMelError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioError(EdgeMelError):
    """Scenario or manifest file failed to parse or validate.

    Carries the offending key path so callers can point at the exact field.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class InfeasibleError(EdgeMelError):
    """No allocation satisfies the deadline/energy/batch constraints.

    ``learner`` identifies the binding learner when a single one is to blame
    (e.g. its fixed exchange overhead already exceeds the deadline).
    """

    def __init__(self, message, learner=None):
        self.learner = learner
        if learner is not None:
            message = f"learner {learner}: {message}"
        super().__init__(message)


class SolverConvergenceError(EdgeMelError):
    """Iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message, iterate=None, residual=None):
        self.iterate = iterate
        self.residual = residual
        super().__init__(message)


class SolverUnboundedError(EdgeMelError):
    """Objective exceeded its configured cap; the problem looks unbounded."""


class DegenerateDualError(EdgeMelError):
    """Dual quadratic form vanished while its linear part did not.

    The closed-form candidate point is undefined in this situation; callers
    are expected to fall back to the exact bisection solver.
    """


class ContractViolation(EdgeMelError):
    """An internal invariant was broken (bad input shape, invalid state)."""
