"""Segmentation-style integration: alternating minimization of an elliptic
relaxation with four directional edge-indicator fields.

Each indicator field multiplies the residual of one one-sided stencil, so a
thin discontinuity can cut a forward difference while leaving the backward
one intact. A quadratic well holds the indicators near 1 away from edges;
its strength grows as the relaxation width epsilon shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import DIRECTIONS, DomainMask
from .fields import DepthMap, GradientField, PriorField
from .linalg import NonConvergenceError, SolverConfig, pcg_solve
from .operators import SparseOperatorSet, build_operator_set, lambda_diagonal
from .quadratic import integrate_quadratic


@dataclass
class MsConfig:
    mu: float                   # fidelity weight; the critical parameter
    epsilon: float = 0.1        # relaxation width of the edge indicators
    iterations: int = 50        # outer alternations
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(
            rel_tolerance=1e-4, max_iterations=500, preconditioner="none"
        )
    )

    def __post_init__(self):
        if self.mu <= 0 or self.epsilon <= 0:
            raise ValueError("mu and epsilon must be positive")


@dataclass
class IndicatorFields:
    """One edge-indicator vector per one-sided difference direction."""

    w: dict

    @classmethod
    def ones(cls, n: int) -> "IndicatorFields":
        return cls(w={d: np.ones(n) for d in DIRECTIONS})

    def copy(self) -> "IndicatorFields":
        return IndicatorFields(w={d: v.copy() for d, v in self.w.items()})

    def min_map(self, ops: SparseOperatorSet) -> np.ndarray:
        """Single edge map for export: pointwise minimum over the four fields."""
        stacked = np.stack([self.w[d] for d in DIRECTIONS], axis=0)
        return ops.index_map.to_raster(stacked.min(axis=0))


@dataclass
class MsResult:
    depth: DepthMap
    z: np.ndarray
    indicators: IndicatorFields
    energies: list   # energy after every sub-update (five per alternation)


def _data_vectors(ops: SparseOperatorSet, g: GradientField):
    im = ops.index_map
    p = im.to_vector(g.p)
    q = im.to_vector(g.q)
    return {"u+": p, "u-": p, "v+": q, "v-": q}


def _masked_residual(ops: SparseOperatorSet, z: np.ndarray, data: np.ndarray,
                     d: str) -> np.ndarray:
    """One-sided residual, zero where the stencil has no neighbor."""
    res = ops.apply_diff(z, d)
    out = np.zeros(ops.n)
    rows = ops.rows[d]
    out[rows] = res[rows] - data[rows]
    return out


def at_energy(z: np.ndarray, w: IndicatorFields, g: GradientField,
              prior: PriorField, cfg: MsConfig, ops: SparseOperatorSet) -> float:
    """Full relaxed energy: weighted fidelity, indicator smoothness, the
    (w-1)^2 well, and the depth prior."""
    data = _data_vectors(ops, g)
    lam = lambda_diagonal(ops, prior)
    z0 = ops.index_map.to_vector(prior.z0)
    total = float(lam @ (z - z0) ** 2)
    for d in DIRECTIONS:
        res = _masked_residual(ops, z, data[d], d)
        wr = w.w[d] * res
        total += 0.5 * cfg.mu * float(wr @ wr)
        dw = ops.diff[d] @ w.w[d]
        total += 0.5 * cfg.epsilon * float(dw @ dw)
        gap = w.w[d] - 1.0
        total += float(gap @ gap) / (8.0 * cfg.epsilon)
    return total


def _solve_warm(a, b, x0, cfg: SolverConfig) -> np.ndarray:
    try:
        return pcg_solve(a, b, x0=x0, cfg=cfg).x
    except NonConvergenceError as err:
        # warm-started CG is still a descent step; keep the best iterate
        return err.best_x


def ms_z_update(z: np.ndarray, w: IndicatorFields, g: GradientField,
                prior: PriorField, cfg: MsConfig, ops: SparseOperatorSet) -> np.ndarray:
    """Exact block minimization in z: a weighted sparse least-squares solve.

    The matrix changes every alternation (weights move), so the solve uses
    plain warm-started conjugate gradients without a preconditioner.
    """
    data = _data_vectors(ops, g)
    lam = lambda_diagonal(ops, prior)
    z0 = ops.index_map.to_vector(prior.z0)
    a = sp.diags(lam).tocsr()
    b = lam * z0
    for d in DIRECTIONS:
        dm = ops.diff[d]
        w2 = w.w[d] ** 2
        a = a + 0.5 * cfg.mu * (dm.T @ sp.diags(w2) @ dm)
        masked_data = np.zeros(ops.n)
        rows = ops.rows[d]
        masked_data[rows] = data[d][rows]
        b = b + 0.5 * cfg.mu * (dm.T @ (w2 * masked_data))
    a = a.tocsr()
    a.sort_indices()
    return _solve_warm(a, b, z, cfg.solver)


def ms_w_update(z: np.ndarray, w: IndicatorFields, g: GradientField,
                cfg: MsConfig, ops: SparseOperatorSet) -> IndicatorFields:
    """Exact block minimization of each indicator field in a fixed order.

    Each field solves an SPD system with diagonal mu*residual^2 + 1/(4 eps)
    plus the eps-weighted smoothness coupling.
    """
    data = _data_vectors(ops, g)
    out = w.copy()
    for d in DIRECTIONS:
        res = _masked_residual(ops, z, data[d], d)
        dm = ops.diff[d]
        a = (cfg.mu * sp.diags(res**2)
             + cfg.epsilon * (dm.T @ dm)
             + sp.diags(np.full(ops.n, 1.0 / (4.0 * cfg.epsilon)))).tocsr()
        a.sort_indices()
        b = np.full(ops.n, 1.0 / (4.0 * cfg.epsilon))
        out.w[d] = _solve_warm(a, b, out.w[d], cfg.solver)
    return out


def integrate_mumford_shah(
    g: GradientField,
    prior: PriorField | None = None,
    mask: DomainMask | None = None,
    cfg: MsConfig | None = None,
    z_init: np.ndarray | None = None,
    ops: SparseOperatorSet | None = None,
) -> MsResult:
    """Alternate the depth solve and the four indicator solves.

    Every sub-update is an exact block minimization started from the current
    block value, so the recorded energy history is non-increasing.
    """
    if cfg is None:
        raise ValueError("MsConfig with an explicit mu is required")
    if mask is None:
        mask = DomainMask.full(*g.p.shape)
    if prior is None:
        prior = PriorField.default(mask)
    g.validate(mask)
    prior.validate(mask)
    if ops is None:
        ops = build_operator_set(mask)
    if z_init is None:
        z_init = integrate_quadratic(g, prior, mask, ops=ops).z
    z = np.asarray(z_init, dtype=np.float64).copy()
    w = IndicatorFields.ones(ops.n)
    energies = [at_energy(z, w, g, prior, cfg, ops)]
    data = _data_vectors(ops, g)
    lam = lambda_diagonal(ops, prior)
    for _ in range(cfg.iterations):
        z = ms_z_update(z, w, g, prior, cfg, ops)
        energies.append(at_energy(z, w, g, prior, cfg, ops))
        for d in DIRECTIONS:
            res = _masked_residual(ops, z, data[d], d)
            dm = ops.diff[d]
            a = (cfg.mu * sp.diags(res**2)
                 + cfg.epsilon * (dm.T @ dm)
                 + sp.diags(np.full(ops.n, 1.0 / (4.0 * cfg.epsilon)))).tocsr()
            a.sort_indices()
            b = np.full(ops.n, 1.0 / (4.0 * cfg.epsilon))
            w.w[d] = _solve_warm(a, b, w.w[d], cfg.solver)
            energies.append(at_energy(z, w, g, prior, cfg, ops))
    return MsResult(
        depth=DepthMap(ops.index_map.to_raster(z)),
        z=z,
        indicators=w,
        energies=energies,
    )
