class ConfigurationError(ValueError):
    """Unsupported domain, missing coefficient data, or invalid parameters."""


class GeometryError(ValueError):
    """Degenerate or wrongly oriented elements."""


class HierarchyError(ValueError):
    """Meshes that are not related by refinement."""


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``residual`` carries the relative residual that was achieved.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ReductionError(RuntimeError):
    """The right-hand matrix of a dense pencil is not positive definite."""
