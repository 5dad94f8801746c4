"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Vector or region dimensions do not agree."""


class VertexBudgetError(ValueError):
    """A hyper-rectangle has too many vertices to enumerate."""


class HorizonError(ValueError):
    """A trajectory does not cover the time window a task needs."""


class GraphError(ValueError):
    """Invalid graph input (disconnected, unknown node, bad path)."""


class UnboundedSetError(ValueError):
    """A predicate superlevel set is unbounded where a bounded one is required."""


class ConflictError(ValueError):
    """Two inherited (non-parametric) tasks are in conflict; nothing can resolve it."""


class InfeasibleError(RuntimeError):
    """The convex program has no strictly feasible point.

    ``certificate`` holds the phase-I result (minimized max violation and the
    point achieving it) when available.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SynthesisError(RuntimeError):
    """Trajectory synthesis could not place agents inside every active region."""


class ScenarioError(ValueError):
    """Scenario or parameter file failed to parse or validate."""
