"""Exception types raised across the package."""


class DomainError(ValueError):
    """A state or concentration vector left the strictly positive orthant."""


class ConsistencyError(ValueError):
    """Two objects that must describe the same network or mesh disagree."""


class ConvergenceError(RuntimeError):
    """An iterative solve stopped before reaching its tolerance."""


class MeshError(ValueError):
    """A simplicial complex violates a structural requirement."""


class ConfigError(ValueError):
    """A run configuration could not be parsed or validated."""
