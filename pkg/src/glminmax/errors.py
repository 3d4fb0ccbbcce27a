"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class GLError(Exception):
    """Base class; ``stage`` names the module that raised."""

    stage = "glminmax"


class MeshError(GLError):
    stage = "manifold"


class ResolutionError(GLError):
    """A requested scale is below what the discretization can resolve."""

    stage = "resolution"


class ConvergenceError(GLError):
    """An iterative solver failed; carries its diagnostics."""

    stage = "solver"

    def __init__(self, message: str, *, residual: float | None = None,
                 iterations: int | None = None, best=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.best = best


class FamilyError(GLError):
    """A disk family violates the boundary condition of the admissible class."""

    stage = "sweepfamily"


class ConfigError(GLError):
    stage = "config"
