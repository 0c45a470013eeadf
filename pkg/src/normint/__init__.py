"""normint: variational integration of gradient/normal fields into depth maps.

Five integrators over arbitrary masked pixel domains share one discretization:
least squares, total-variation-like splitting, non-convex robust estimation,
anisotropic-diffusion weighting, and a Mumford-Shah style segmentation model.
"""

from .domain import DomainMask, IndexMap, DirectionalSubdomains, build_index_map, neighbor_subdomains
from .fields import DepthMap, GradientField, PriorField
from .linalg import SolverConfig, pcg_solve, direct_solve_spd
from .operators import SparseOperatorSet, build_operator_set, build_quadratic_system
from .quadratic import integrate_quadratic

__all__ = [
    "DomainMask",
    "IndexMap",
    "DirectionalSubdomains",
    "build_index_map",
    "neighbor_subdomains",
    "DepthMap",
    "GradientField",
    "PriorField",
    "SolverConfig",
    "pcg_solve",
    "direct_solve_spd",
    "SparseOperatorSet",
    "build_operator_set",
    "build_quadratic_system",
    "integrate_quadratic",
]
