"""Exception types shared across the toolkit."""


class InfeasibleError(RuntimeError):
    """A requested operating point cannot be met with finite resources."""


class SolverError(RuntimeError):
    """An iterative solver failed to bracket or converge."""


class InstabilityError(ValueError):
    """Queue utilization at or above 1: no stationary distribution."""


class UnsupportedFadingError(ValueError):
    """Fading-model parameter combination outside the supported family."""
