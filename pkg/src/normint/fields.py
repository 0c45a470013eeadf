"""Per-pixel fields: gradient observations, depth maps, and priors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainMask

DEFAULT_LAMBDA = 1e-6


def _check_finite_on(mask: DomainMask, *rasters):
    for r in rasters:
        if r.shape != mask.inside.shape:
            raise ValueError("field shape does not match the domain grid")
        if not np.isfinite(r[mask.inside]).all():
            raise ValueError("field contains non-finite values inside the domain")


@dataclass
class GradientField:
    """Observed depth derivatives: p along u (rows), q along v (columns)."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.p.shape != self.q.shape:
            raise ValueError("p and q must share a shape")

    def validate(self, mask: DomainMask) -> "GradientField":
        _check_finite_on(mask, self.p, self.q)
        return self

    def sup_norm(self, mask: DomainMask) -> float:
        """Largest absolute component over the domain."""
        m = mask.inside
        return float(max(np.abs(self.p[m]).max(), np.abs(self.q[m]).max()))


@dataclass
class DepthMap:
    """Scalar depth per pixel; NaN outside the domain by convention."""

    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)

    def validate(self, mask: DomainMask) -> "DepthMap":
        _check_finite_on(mask, self.z)
        return self


@dataclass
class PriorField:
    """Depth prior z0 with a non-negative pointwise weight field."""

    z0: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.z0.shape != self.lam.shape:
            raise ValueError("z0 and lambda must share a shape")

    def validate(self, mask: DomainMask) -> "PriorField":
        _check_finite_on(mask, self.z0, self.lam)
        if (self.lam[mask.inside] < 0).any():
            raise ValueError("lambda must be non-negative")
        return self

    @classmethod
    def default(cls, mask: DomainMask, lam: float = DEFAULT_LAMBDA) -> "PriorField":
        """z0 = 0 with a small uniform weight, fixing the integration constant."""
        shape = mask.inside.shape
        return cls(np.zeros(shape), np.full(shape, float(lam)))
