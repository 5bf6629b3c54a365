"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument or precondition violation."""


class ConsistencyError(RuntimeError):
    """Two independent computations that must agree did not."""


class ConfigError(ValueError):
    """Infeasible simulator or pipeline configuration."""
