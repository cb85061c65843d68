"""Error types shared across the package.

Plain ValueError is used for domain errors on scalar arguments (bad
exponent range, delta out of range, ...); the classes below mark the
two situations callers may want to handle separately: rejected
configurations and numerical failures during integration/assembly.
"""


class ConfigurationError(ValueError):
    """A configuration (file, dataclass, or argument combination) is invalid."""


class ShapeError(ValueError):
    """An array argument has the wrong shape or length."""


class NumericsError(RuntimeError):
    """A numerical procedure failed (non-convergence, tolerance blow-up)."""
