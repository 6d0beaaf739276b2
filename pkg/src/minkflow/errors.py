"""Exception types shared across the package."""


class GeometryError(ValueError):
    """A geometric precondition failed (origin not interior, convexity lost)."""


class HypothesisError(ValueError):
    """A structural hypothesis check on the problem data failed."""


class ConfigError(ValueError):
    """A run configuration is invalid (schema, grid, or hypothesis failure)."""
