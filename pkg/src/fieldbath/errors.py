"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for invalid scenario configuration files or parameters."""


class NumericalError(RuntimeError):
    """Raised when an integrator detects NaN/overflow, positivity loss,
    or trace drift beyond tolerance."""
