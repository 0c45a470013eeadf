"""Isotropic-TV-like integration via ADMM.

The non-smooth fidelity couples both derivative components per pixel, one
copy per sign pair (U, V) on the pixels where that one-sided stencil exists.
Each sweep alternates a sparse SDD solve in z, a closed-form generalized
shrinkage on the auxiliary residual vectors, and a scaled dual ascent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domain import SIGN_PAIRS, DomainMask
from .fields import DepthMap, GradientField, PriorField
from .linalg import SolverConfig, make_preconditioner, pcg_solve
from .operators import SparseOperatorSet, build_operator_set, lambda_diagonal
from .quadratic import integrate_quadratic


@dataclass
class TvConfig:
    alpha: float = 1.0          # ADMM step size; affects speed, not the minimizer
    iterations: int = 1000
    early_exit: float = 1e-6    # stop when primal residual < early_exit * n
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class AdmmState:
    z: np.ndarray       # current depth vector
    r: np.ndarray       # auxiliary residual vectors, (4, n, 2), one slab per sign pair
    b: np.ndarray       # scaled duals, same shape
    alpha: float
    iteration: int = 0


@dataclass
class TvResult:
    depth: DepthMap
    z: np.ndarray
    primal_residuals: list
    state: AdmmState


def tv_shrinkage(s, alpha: float):
    """Generalized shrinkage: radial soft threshold at 4/alpha.

    Minimizes (alpha/8)||r - s||^2 + ||r|| over 2-vectors; returns zero for
    s = 0 and max(||s|| - 4/alpha, 0) * s/||s|| otherwise.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    s = np.asarray(s, dtype=np.float64)
    norm = np.linalg.norm(s, axis=-1)
    scale = np.zeros_like(norm)
    nz = norm > 0
    scale[nz] = np.maximum(norm[nz] - 4.0 / alpha, 0.0) / norm[nz]
    return scale[..., None] * s


class _TvWorkspace:
    """Mask-dependent pieces shared by every sweep: the z-update matrix is
    iteration-independent, so its preconditioner is computed once."""

    def __init__(self, ops: SparseOperatorSet, g: GradientField, prior: PriorField,
                 cfg: TvConfig):
        self.ops = ops
        self.cfg = cfg
        im = ops.index_map
        self.p = im.to_vector(g.p)
        self.q = im.to_vector(g.q)
        self.g = np.stack([self.p, self.q], axis=1)
        self.lam = lambda_diagonal(ops, prior)
        self.z0 = im.to_vector(prior.z0)
        self.masks = [ops.omega_uv[pair].astype(np.float64) for pair in SIGN_PAIRS]
        scale = cfg.alpha / 8.0
        a = sp.diags(self.lam).tocsr()
        self.dus = []
        self.dvs = []
        for (su, sv), m in zip(SIGN_PAIRS, self.masks):
            du = ops.diff["u" + su]
            dv = ops.diff["v" + sv]
            w = sp.diags(m)
            a = a + scale * (du.T @ w @ du + dv.T @ w @ dv)
            self.dus.append(du)
            self.dvs.append(dv)
        self.a_tv = a.tocsr()
        self.a_tv.sort_indices()
        self.precond = make_preconditioner(self.a_tv, cfg.solver.preconditioner)

    def rhs(self, state: AdmmState) -> np.ndarray:
        scale = self.cfg.alpha / 8.0
        b = self.lam * self.z0
        for k, m in enumerate(self.masks):
            target = self.g + state.r[k] - state.b[k]
            b = b + scale * (self.dus[k].T @ (m * target[:, 0])
                             + self.dvs[k].T @ (m * target[:, 1]))
        return b

    def z_update(self, state: AdmmState) -> np.ndarray:
        return pcg_solve(self.a_tv, self.rhs(state), state.z, self.cfg.solver,
                         precond=self.precond).x

    def pair_gradients(self, z: np.ndarray) -> np.ndarray:
        return np.stack(
            [self.ops.pair_diff(z, su, sv) for su, sv in SIGN_PAIRS], axis=0
        )

    def primal_residual(self, grads: np.ndarray, state: AdmmState) -> float:
        total = 0.0
        for k, m in enumerate(self.masks):
            gap = grads[k] - self.g - state.r[k]
            total += float((m * np.linalg.norm(gap, axis=1)).sum())
        return total


def tv_z_update(state: AdmmState, g: GradientField, prior: PriorField,
                ops: SparseOperatorSet, cfg: TvConfig | None = None) -> np.ndarray:
    """One standalone z-update (the sparse SDD solve), warm-started at state.z."""
    cfg = cfg or TvConfig()
    return _TvWorkspace(ops, g, prior, cfg).z_update(state)


def initial_state(ops: SparseOperatorSet, z: np.ndarray, alpha: float) -> AdmmState:
    n = ops.n
    return AdmmState(z=z.copy(), r=np.zeros((4, n, 2)), b=np.zeros((4, n, 2)),
                     alpha=alpha)


def integrate_tv(
    g: GradientField,
    prior: PriorField | None = None,
    mask: DomainMask | None = None,
    cfg: TvConfig | None = None,
    ops: SparseOperatorSet | None = None,
    z_init: np.ndarray | None = None,
) -> TvResult:
    """Run the ADMM loop for the configured budget.

    z starts from the least-squares solution (auxiliaries and duals from 0),
    which only affects convergence speed: the objective is convex.
    """
    cfg = cfg or TvConfig()
    if mask is None:
        mask = DomainMask.full(*g.p.shape)
    if prior is None:
        prior = PriorField.default(mask)
    g.validate(mask)
    prior.validate(mask)
    if ops is None:
        ops = build_operator_set(mask)
    if z_init is None:
        z_init = integrate_quadratic(g, prior, mask, cfg.solver, ops).z
    work = _TvWorkspace(ops, g, prior, cfg)
    state = initial_state(ops, np.asarray(z_init, dtype=np.float64), cfg.alpha)
    history = []
    for _ in range(cfg.iterations):
        state.z = work.z_update(state)
        grads = work.pair_gradients(state.z)
        for k, m in enumerate(work.masks):
            s = grads[k] - work.g + state.b[k]
            state.r[k] = tv_shrinkage(s, cfg.alpha) * m[:, None]
            state.b[k] = (state.b[k] + grads[k] - work.g - state.r[k]) * m[:, None]
        state.iteration += 1
        residual = work.primal_residual(grads, state)
        history.append(residual)
        if residual < cfg.early_exit * ops.n:
            break
    return TvResult(
        depth=DepthMap(ops.index_map.to_raster(state.z)),
        z=state.z,
        primal_residuals=history,
        state=state,
    )


def tv_energy(ops: SparseOperatorSet, z: np.ndarray, g: GradientField,
              prior: PriorField) -> float:
    """The TV objective: quarter-weighted pairwise residual norms plus prior."""
    im = ops.index_map
    p = im.to_vector(g.p)
    q = im.to_vector(g.q)
    lam = lambda_diagonal(ops, prior)
    z0 = im.to_vector(prior.z0)
    total = float(lam @ (z - z0) ** 2)
    for su, sv in SIGN_PAIRS:
        m = ops.omega_uv[(su, sv)]
        grad = ops.pair_diff(z, su, sv)
        res = grad - np.stack([p, q], axis=1)
        total += 0.25 * float(np.linalg.norm(res[m], axis=1).sum())
    return total
