"""Non-convex robust integration by an inertial forward-backward scheme.

The fidelity applies a redescending penalty to the per-pixel residual norm of
every one-sided gradient stencil; the smooth non-convex part is handled by
gradient steps with heavy-ball inertia, the convex prior by its exact
proximal map. The step size is adapted lazily: halve on violation of the
descent inequality, attempt one doubling every ten accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import SIGN_PAIRS, DomainMask
from .fields import DepthMap, GradientField, PriorField
from .operators import SparseOperatorSet, build_operator_set, lambda_diagonal
from .quadratic import integrate_quadratic


@dataclass
class PhiFunction:
    """Robust penalty on residual magnitude.

    ``phi1`` is log(s^2 + beta^2): quadratic near 0, logarithmic at infinity.
    ``phi2`` is s^2/(s^2 + gamma^2): quadratic near 0, saturating at 1.
    """

    kind: str
    beta: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("phi1", "phi2"):
            raise ValueError(f"unknown phi kind {self.kind!r}")
        if self.kind == "phi1" and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.kind == "phi2" and self.gamma <= 0:
            raise ValueError("gamma must be positive")


def phi_eval(phi: PhiFunction, s):
    s = np.asarray(s, dtype=np.float64)
    if phi.kind == "phi1":
        return np.log(s**2 + phi.beta**2)
    return s**2 / (s**2 + phi.gamma**2)


def phi_deriv(phi: PhiFunction, s):
    s = np.asarray(s, dtype=np.float64)
    if phi.kind == "phi1":
        return 2.0 * s / (s**2 + phi.beta**2)
    return 2.0 * phi.gamma**2 * s / (s**2 + phi.gamma**2) ** 2


@dataclass
class IpianoConfig:
    alpha2: float = 0.8        # inertia weight
    iterations: int = 1000
    alpha1_init: float = 1.0   # backtracked step size
    doubling_interval: int = 10

    def __post_init__(self):
        if not 0.0 <= self.alpha2 < 1.0:
            raise ValueError("alpha2 must lie in [0, 1)")
        if self.alpha1_init <= 0:
            raise ValueError("alpha1 must be positive")


class BacktrackingError(RuntimeError):
    """Step size underflow; carries the last stable iterate."""

    def __init__(self, message, z, energies):
        super().__init__(message)
        self.z = z
        self.energies = energies


@dataclass
class NonconvexResult:
    depth: DepthMap
    z: np.ndarray
    energies: list
    alpha1: float


def _gvec(ops: SparseOperatorSet, g: GradientField) -> np.ndarray:
    im = ops.index_map
    return np.stack([im.to_vector(g.p), im.to_vector(g.q)], axis=1)


def fidelity_energy(z: np.ndarray, gvec: np.ndarray, ops: SparseOperatorSet,
                    phi: PhiFunction) -> float:
    """Quarter-weighted sum of the penalty over every sign pair's pixels."""
    total = 0.0
    for su, sv in SIGN_PAIRS:
        m = ops.omega_uv[(su, sv)]
        res = ops.pair_diff(z, su, sv) - gvec
        s = np.linalg.norm(res[m], axis=1)
        total += 0.25 * float(phi_eval(phi, s).sum())
    return total


def grad_f(z: np.ndarray, gvec: np.ndarray, ops: SparseOperatorSet,
           phi: PhiFunction) -> np.ndarray:
    """Gradient of the fidelity term in its simplified closed form.

    Uses phi'(s)/s, which stays finite at zero residual for both penalties:
    2/(s^2+beta^2) and 2 gamma^2/(s^2+gamma^2)^2.
    """
    out = np.zeros(ops.n)
    for su, sv in SIGN_PAIRS:
        m = ops.omega_uv[(su, sv)].astype(np.float64)
        res = ops.pair_diff(z, su, sv) - gvec
        s2 = res[:, 0] ** 2 + res[:, 1] ** 2
        if phi.kind == "phi1":
            coef = m / (s2 + phi.beta**2)
        else:
            coef = m * phi.gamma**2 / (s2 + phi.gamma**2) ** 2
        out += ops.diff_t["u" + su] @ (coef * res[:, 0])
        out += ops.diff_t["v" + sv] @ (coef * res[:, 1])
    return 0.5 * out


def prox_g(x_hat: np.ndarray, alpha1: float, lam: np.ndarray,
           z0: np.ndarray) -> np.ndarray:
    """Exact proximal map of the prior: a diagonal solve."""
    return (x_hat + 2.0 * alpha1 * lam * z0) / (1.0 + 2.0 * alpha1 * lam)


def prior_energy(z: np.ndarray, lam: np.ndarray, z0: np.ndarray) -> float:
    return float(lam @ (z - z0) ** 2)


def total_energy(z: np.ndarray, gvec: np.ndarray, ops: SparseOperatorSet,
                 phi: PhiFunction, lam: np.ndarray, z0: np.ndarray) -> float:
    return fidelity_energy(z, gvec, ops, phi) + prior_energy(z, lam, z0)


def integrate_nonconvex(
    g: GradientField,
    prior: PriorField | None = None,
    mask: DomainMask | None = None,
    phi: PhiFunction | None = None,
    cfg: IpianoConfig | None = None,
    z_init: np.ndarray | None = None,
    ops: SparseOperatorSet | None = None,
) -> NonconvexResult:
    """Run the inertial scheme; records the composite energy each iteration.

    z_init defaults to the least-squares solution; the landscape is
    non-convex, so the starting point genuinely matters.
    """
    cfg = cfg or IpianoConfig()
    phi = phi or PhiFunction("phi1")
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
    im = ops.index_map
    gvec = _gvec(ops, g)
    lam = lambda_diagonal(ops, prior)
    z0 = im.to_vector(prior.z0)

    z = np.asarray(z_init, dtype=np.float64).copy()
    z_prev = z.copy()
    alpha1 = cfg.alpha1_init
    floor = cfg.alpha1_init * 1e-14
    f_z = fidelity_energy(z, gvec, ops, phi)
    energies = [f_z + prior_energy(z, lam, z0)]
    accepted = 0
    slack = 1e-12 * max(1.0, abs(energies[0]))
    for _ in range(cfg.iterations):
        grad = grad_f(z, gvec, ops, phi)
        while True:
            cand = prox_g(z - alpha1 * grad + cfg.alpha2 * (z - z_prev),
                          alpha1, lam, z0)
            delta = cand - z
            f_cand = fidelity_energy(cand, gvec, ops, phi)
            bound = (f_z + float(grad @ delta)
                     + (1.0 - cfg.alpha2) / (2.0 * alpha1) * float(delta @ delta))
            if f_cand <= bound + slack:
                break
            alpha1 *= 0.5
            if alpha1 < floor:
                raise BacktrackingError("step size underflow", z, energies)
        z_prev, z, f_z = z, cand, f_cand
        accepted += 1
        if accepted % cfg.doubling_interval == 0:
            alpha1 *= 2.0
        energies.append(f_z + prior_energy(z, lam, z0))
    return NonconvexResult(
        depth=DepthMap(im.to_raster(z)), z=z, energies=energies, alpha1=alpha1
    )
