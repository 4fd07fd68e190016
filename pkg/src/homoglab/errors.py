class HomogLabError(Exception):
    """Base class for all errors raised by homoglab."""


class ConfigError(HomogLabError, ValueError):
    """Invalid problem parameters, coefficient tables or run configs."""


class NumericalError(HomogLabError, RuntimeError):
    """A numerical invariant failed (assembly bug, gap violation, quadrature miss)."""
