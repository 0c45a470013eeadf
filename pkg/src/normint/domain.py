"""Masked reconstruction domains on a regular pixel grid.

Conventions: ``u`` indexes rows (increasing downwards), ``v`` indexes columns
(increasing to the right). A pixel belongs to the domain iff its mask entry is
True. Unknowns are enumerated column-major over the inside pixels, which fixes
the layout of every vector and sparse matrix in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Directional neighbors: "u+" is the pixel below, "u-" above, "v+" right, "v-" left.
DIRECTIONS = ("u+", "u-", "v+", "v-")
_OFFSETS = {"u+": (1, 0), "u-": (-1, 0), "v+": (0, 1), "v-": (0, -1)}
# The four sign pairs (U, V) used by the robust integrators.
SIGN_PAIRS = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))


class EmptyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class DomainMask:
    """Boolean raster: True marks pixels that carry unknowns and data."""

    inside: np.ndarray

    def __post_init__(self):
        inside = np.asarray(self.inside, dtype=bool)
        if inside.ndim != 2:
            raise ValueError("mask must be a 2-D raster")
        if not inside.any():
            raise EmptyDomainError("empty domain")
        object.__setattr__(self, "inside", inside)

    @property
    def height(self) -> int:
        return self.inside.shape[0]

    @property
    def width(self) -> int:
        return self.inside.shape[1]

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    @classmethod
    def full(cls, height: int, width: int) -> "DomainMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_pgm(cls, path) -> "DomainMask":
        from . import io as _io

        return cls(_io.read_pgm(path) > 127)


@dataclass(frozen=True)
class IndexMap:
    """Bijection between inside pixels and linear indices 0..n-1.

    ``forward[u, v]`` holds the linear index (or -1 outside); ``backward[i]``
    holds the pixel ``(u, v)`` of unknown ``i``. Enumeration is column-major
    over inside pixels: all inside pixels of column 0 top to bottom, then
    column 1, and so on.
    """

    forward: np.ndarray
    backward: np.ndarray

    @property
    def n(self) -> int:
        return self.backward.shape[0]

    def to_vector(self, raster: np.ndarray) -> np.ndarray:
        """Gather the inside pixels of a raster into an unknown-ordered vector."""
        return np.ascontiguousarray(
            np.asarray(raster, dtype=np.float64)[self.backward[:, 0], self.backward[:, 1]]
        )

    def to_raster(self, vec: np.ndarray, fill=np.nan) -> np.ndarray:
        """Scatter a vector back onto the grid, `fill` outside the domain."""
        out = np.full(self.forward.shape, fill, dtype=np.float64)
        out[self.backward[:, 0], self.backward[:, 1]] = vec
        return out


def build_index_map(mask: DomainMask) -> IndexMap:
    """Enumerate the inside pixels column-major and build both index maps."""
    inside = mask.inside
    if not inside.any():
        raise EmptyDomainError("empty domain")
    # Fortran-order scan = column-major enumeration.
    vs, us = np.nonzero(inside.T)
    backward = np.stack([us, vs], axis=1).astype(np.int64)
    forward = np.full(inside.shape, -1, dtype=np.int64)
    forward[us, vs] = np.arange(backward.shape[0], dtype=np.int64)
    return IndexMap(forward=forward, backward=backward)


@dataclass(frozen=True)
class DirectionalSubdomains:
    """Pixel sets with an inside neighbor in each direction, and their pairings.

    ``masks[d]`` is True at pixels whose ``d``-neighbor is inside the domain.
    ``pairs[(U, V)]`` is the intersection of the ``u``-set for sign U with the
    ``v``-set for sign V.
    """

    masks: dict = field(default_factory=dict)
    pairs: dict = field(default_factory=dict)

    @property
    def omega_u_plus(self) -> np.ndarray:
        return self.masks["u+"]

    @property
    def omega_u_minus(self) -> np.ndarray:
        return self.masks["u-"]

    @property
    def omega_v_plus(self) -> np.ndarray:
        return self.masks["v+"]

    @property
    def omega_v_minus(self) -> np.ndarray:
        return self.masks["v-"]


def _shifted_inside(inside: np.ndarray, du: int, dv: int) -> np.ndarray:
    """True where the pixel and its (du, dv)-neighbor are both inside."""
    h, w = inside.shape
    out = np.zeros_like(inside)
    src = inside[max(du, 0) : h + min(du, 0), max(dv, 0) : w + min(dv, 0)]
    out[max(-du, 0) : h + min(-du, 0), max(-dv, 0) : w + min(-dv, 0)] = src
    return out & inside


def neighbor_subdomains(mask: DomainMask) -> DirectionalSubdomains:
    """Compute the four directional subdomains and their four intersections."""
    masks = {d: _shifted_inside(mask.inside, *_OFFSETS[d]) for d in DIRECTIONS}
    pairs = {
        (su, sv): masks["u" + su] & masks["v" + sv] for su, sv in SIGN_PAIRS
    }
    return DirectionalSubdomains(masks=masks, pairs=pairs)
