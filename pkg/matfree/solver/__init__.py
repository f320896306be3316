"""Matrix-free cone solver."""

from .cones import Cone, ConeSizeError, distance, project, project_cones
from .admm import BACKENDS, AdmmState, Solution, residuals, solve

__all__ = [
    "BACKENDS",
    "AdmmState",
    "Cone",
    "ConeSizeError",
    "Solution",
    "distance",
    "project",
    "project_cones",
    "residuals",
    "solve",
]
