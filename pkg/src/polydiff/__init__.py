"""Symmetric diffusion operators with orthogonal polynomial eigenfunctions."""

from .errors import PolydiffError
from .polyring import DegreeWeights, Poly, RelationSet, exact_divide, express_in
from .operator import (
    BoundarySpec,
    Metric,
    Model,
    apply_L,
    drift_from_measure,
    gamma,
    gaussian_curvature,
    image_operator,
)
from .admissibility import solve_metrics
from .catalog import double_cover, get_model, group_spectral_model, list_entries

__version__ = "0.1.0"

__all__ = [
    "PolydiffError", "DegreeWeights", "Poly", "RelationSet", "exact_divide", "express_in",
    "BoundarySpec", "Metric", "Model", "apply_L", "drift_from_measure", "gamma",
    "gaussian_curvature", "image_operator", "solve_metrics", "double_cover", "get_model",
    "group_spectral_model", "list_entries",
]
