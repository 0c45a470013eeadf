"""Synthetic ground-truth surfaces with analytic gradients, noise injection,
normal/gradient conversions, and error metrics.

The discontinuous surfaces are stand-ins with documented parameters:

* ``vase_like``: a solid of revolution seen side-on over a background plane.
  Cross sections are circular caps of radius R(u) on a plinth of height
  ``jump``, with the silhouette clipped at ``rim``*R so the measured slopes
  stay bounded (|q| <= rim/sqrt(1-rim^2), about 2.3). The depth jumps at the
  silhouette and the steep sides kink against the flat background. R(u)
  swells in the middle.
* ``tent_like``: two planar slopes meeting at a horizontal ridge (a kink),
  plus one depth jump of height ``jump`` across a vertical line. The jump is
  never encoded in the gradient data: g holds the piecewise-analytic slopes.
* ``step``: two flat plateaus differing by ``height``; g is identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainMask
from .fields import DepthMap, GradientField

KINDS = ("plane", "smooth_bumps", "vase_like", "tent_like", "step")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian gradient noise with standard deviation sigma * max|g|."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def _grid(height, width):
    u = np.arange(height, dtype=np.float64)[:, None] * np.ones((1, width))
    v = np.ones((height, 1)) * np.arange(width, dtype=np.float64)[None, :]
    return u, v


def _plane(height, width, su=1.0, sv=2.0):
    u, v = _grid(height, width)
    z = su * u + sv * v
    p = np.full_like(z, su)
    q = np.full_like(z, sv)
    return z, p, q, np.ones_like(z, dtype=bool)


def _smooth_bumps(height, width, amplitude=1.0):
    u, v = _grid(height, width)
    scale = min(height, width)
    bumps = (
        (4.0, 0.35, 0.30, 0.16),
        (-2.5, 0.65, 0.60, 0.14),
        (3.0, 0.30, 0.75, 0.12),
    )
    z = np.zeros_like(u)
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    for a, cu, cv, s in bumps:
        a = a * amplitude
        sig2 = (s * scale) ** 2
        e = a * np.exp(-((u - cu * height) ** 2 + (v - cv * width) ** 2) / (2 * sig2))
        z += e
        p += -(u - cu * height) / sig2 * e
        q += -(v - cv * width) / sig2 * e
    return z, p, q, np.ones_like(z, dtype=bool)


def _vase_like(height, width, jump=5.0, rim=0.92):
    u, v = _grid(height, width)
    t = u / (height - 1)
    radius = width * (0.16 - 0.08 * np.cos(2 * np.pi * t))
    dradius = width * 0.08 * 2 * np.pi / (height - 1) * np.sin(2 * np.pi * t)
    d = v - (width - 1) / 2.0
    inside = np.abs(d) <= rim * radius
    z = np.zeros_like(u)
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    root = np.sqrt(np.maximum(radius**2 - d**2, 1e-12))
    z[inside] = (jump + root)[inside]
    p[inside] = (radius * dradius / root)[inside]
    q[inside] = (-d / root)[inside]
    return z, p, q, inside


def _tent_like(height, width, slope=1.0, jump=10.0):
    u, v = _grid(height, width)
    ridge = (height - 1) / 2.0
    z = slope * np.minimum(u, (height - 1) - u)
    z = z + jump * (v >= width // 2)
    p = np.where(u < ridge, slope, -slope)
    q = np.zeros_like(z)
    return z, p, q, np.ones_like(z, dtype=bool)


def _step(height, width, height_jump=10.0):
    u, v = _grid(height, width)
    z = height_jump * (v >= width // 2).astype(np.float64)
    return z, np.zeros_like(z), np.zeros_like(z), np.ones_like(z, dtype=bool)


_GENERATORS = {
    "plane": _plane,
    "smooth_bumps": _smooth_bumps,
    "vase_like": _vase_like,
    "tent_like": _tent_like,
    "step": _step,
}


def generate_surface(kind, size, **params):
    """Build (depth, gradient, mask) for a named synthetic surface.

    ``size`` is a side length or an (height, width) pair, at least 8. The
    returned rasters cover the full grid (background included); the mask is
    the object silhouette for ``vase_like`` and the full grid otherwise.
    """
    if kind not in _GENERATORS:
        raise ValueError(f"unknown surface kind {kind!r}")
    if np.isscalar(size):
        height = width = int(size)
    else:
        height, width = (int(s) for s in size)
    if min(height, width) < 8:
        raise ValueError("size must be at least 8 pixels per side")
    z, p, q, inside = _GENERATORS[kind](height, width, **params)
    return DepthMap(z), GradientField(p, q), DomainMask(inside)


def difference_observations(depth: DepthMap, g: GradientField) -> GradientField:
    """Gradient observations sampled at pixel resolution: forward differences
    of the true surface, falling back to the analytic slopes on the last row
    and column.

    Unlike the analytic fields, these observations see discontinuity
    crossings (a jump between two pixels shows up as a spike at the earlier
    pixel), which is what a difference-based sensor would report. Least
    squares over-integrates such spikes; the edge-aware integrators treat
    them as evidence.
    """
    z = depth.z
    p = g.p.copy()
    q = g.q.copy()
    p[:-1, :] = z[1:, :] - z[:-1, :]
    q[:, :-1] = z[:, 1:] - z[:, :-1]
    return GradientField(p, q)


def add_gaussian_noise(g: GradientField, spec: NoiseSpec, mask: DomainMask | None = None) -> GradientField:
    """Add homoskedastic Gaussian noise scaled by the sup norm of the field."""
    if mask is None:
        sup = float(max(np.abs(g.p).max(), np.abs(g.q).max()))
    else:
        sup = g.sup_norm(mask)
    rng = np.random.default_rng(spec.seed)
    std = spec.sigma * sup
    return GradientField(
        g.p + std * rng.standard_normal(g.p.shape),
        g.q + std * rng.standard_normal(g.q.shape),
    )


def gradient_to_normals(g: GradientField) -> np.ndarray:
    """Unit camera-facing normals from slopes: n ∝ (-p, -q, 1)."""
    norm = np.sqrt(g.p**2 + g.q**2 + 1.0)
    return np.stack([-g.p / norm, -g.q / norm, 1.0 / norm], axis=-1)


def normals_to_gradient(n: np.ndarray, threshold: float = 1e-3):
    """Slopes from unit normals: (p, q) = (-n1/n3, -n2/n3).

    Pixels with n3 <= threshold are unreliable (grazing surfaces); they get
    zero slopes and a False entry in the returned reliability mask, for the
    caller to exclude from the domain or to down-weight.
    """
    n = np.asarray(n, dtype=np.float64)
    if n.shape[-1] != 3:
        raise ValueError("normal field must have three components")
    n3 = n[..., 2]
    reliable = n3 > threshold
    safe = np.where(reliable, n3, 1.0)
    p = np.where(reliable, -n[..., 0] / safe, 0.0)
    q = np.where(reliable, -n[..., 1] / safe, 0.0)
    return GradientField(p, q), reliable


def rmse_aligned(z, z_true, region=None) -> float:
    """RMSE after removing the mean difference over the region.

    The integration constant is unobservable from gradient data, so errors
    are always compared modulo an additive offset.
    """
    z = np.asarray(z, dtype=np.float64)
    z_true = np.asarray(z_true, dtype=np.float64)
    if region is None:
        region = np.ones(z.shape, dtype=bool)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty evaluation region")
    diff = z[region] - z_true[region]
    diff = diff - diff.mean()
    return float(np.sqrt(np.mean(diff**2)))


def _central_normals(z, inside):
    """Normals from central differences; valid where all four neighbors are inside."""
    h, w = z.shape
    valid = np.zeros((h, w), dtype=bool)
    valid[1:-1, 1:-1] = (
        inside[1:-1, 1:-1]
        & inside[:-2, 1:-1] & inside[2:, 1:-1]
        & inside[1:-1, :-2] & inside[1:-1, 2:]
    )
    p = np.zeros_like(z)
    q = np.zeros_like(z)
    p[1:-1, :] = (z[2:, :] - z[:-2, :]) / 2.0
    q[:, 1:-1] = (z[:, 2:] - z[:, :-2]) / 2.0
    return gradient_to_normals(GradientField(p, q)), valid


def mae_normals(z, z_true, mask: DomainMask | None = None) -> float:
    """Mean angular error, in degrees, between normal maps rebuilt from
    central differences. Boundary and background pixels are excluded."""
    z = np.asarray(z, dtype=np.float64)
    z_true = np.asarray(z_true, dtype=np.float64)
    inside = mask.inside if mask is not None else np.ones(z.shape, dtype=bool)
    n_est, valid = _central_normals(z, inside)
    n_true, _ = _central_normals(z_true, inside)
    if valid.sum() < 1:
        raise ValueError("no pixel admits central differences")
    a = n_est[valid]
    b = n_true[valid]
    dots = np.sum(a * b, axis=-1)
    crosses = np.linalg.norm(np.cross(a, b), axis=-1)
    # atan2 form is exact for identical normals and accurate at small angles
    return float(np.degrees(np.arctan2(crosses, dots)).mean())
