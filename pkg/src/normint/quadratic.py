"""Least-squares integration: minimize the quadratic discrete energy by
solving the sparse normal equations A z = b."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainMask
from .fields import DepthMap, GradientField, PriorField
from .linalg import SolverConfig, pcg_solve
from .operators import SparseOperatorSet, build_operator_set, build_quadratic_system


@dataclass
class QuadraticResult:
    depth: DepthMap
    z: np.ndarray          # unknown-ordered solution vector
    iterations: int
    residual: float


def integrate_quadratic(
    g: GradientField,
    prior: PriorField | None = None,
    mask: DomainMask | None = None,
    cfg: SolverConfig | None = None,
    ops: SparseOperatorSet | None = None,
) -> QuadraticResult:
    """Integrate a gradient field in the least-squares sense.

    The prior defaults to z0 = 0 with a uniform weight of 1e-6, which only
    pins the otherwise free integration constant. The solver starts from z0.
    """
    if mask is None:
        mask = DomainMask.full(*g.p.shape)
    if prior is None:
        prior = PriorField.default(mask)
    g.validate(mask)
    prior.validate(mask)
    if ops is None:
        ops = build_operator_set(mask)
    a, b = build_quadratic_system(ops, g, prior)
    z0 = ops.index_map.to_vector(prior.z0)
    res = pcg_solve(a, b, x0=z0, cfg=cfg)
    return QuadraticResult(
        depth=DepthMap(ops.index_map.to_raster(res.x)),
        z=res.x,
        iterations=res.iterations,
        residual=res.residual,
    )
