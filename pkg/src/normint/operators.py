"""Sparse finite-difference operators on a masked grid.

All matrices are |Omega| x |Omega| with zero rows where the directional
neighbor is missing, so transposed compositions stay square and the assembled
shapes match independent of the mask. Assembly uses deterministic triplet
order: repeated builds of the same mask are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import (
    DIRECTIONS,
    SIGN_PAIRS,
    DirectionalSubdomains,
    DomainMask,
    IndexMap,
    _OFFSETS,
    build_index_map,
    neighbor_subdomains,
)
from .fields import GradientField, PriorField


@dataclass(frozen=True)
class SparseOperatorSet:
    """All operators for one mask: four one-sided differences, their
    half-averaged adjoints, the connectivity Laplacian, and index plumbing
    for matrix-free stencil evaluation."""

    mask: DomainMask
    index_map: IndexMap
    subdomains: DirectionalSubdomains
    diff: dict            # direction -> CSR one-sided difference matrix
    diff_t: dict          # direction -> its transpose, precomputed CSR
    d_u: sp.csr_matrix    # 0.5 * (D_u^+ᵀ + D_u^-ᵀ)
    d_v: sp.csr_matrix
    laplacian: sp.csr_matrix
    rows: dict            # direction -> linear indices with that neighbor
    nbrs: dict            # direction -> linear index of that neighbor
    omega_uv: dict        # (U, V) -> bool vector over unknowns

    @property
    def n(self) -> int:
        return self.index_map.n

    @property
    def d_u_plus(self) -> sp.csr_matrix:
        return self.diff["u+"]

    @property
    def d_u_minus(self) -> sp.csr_matrix:
        return self.diff["u-"]

    @property
    def d_v_plus(self) -> sp.csr_matrix:
        return self.diff["v+"]

    @property
    def d_v_minus(self) -> sp.csr_matrix:
        return self.diff["v-"]

    def apply_diff(self, z: np.ndarray, direction: str) -> np.ndarray:
        """One-sided difference of z, zero where the neighbor is missing."""
        out = np.zeros(self.n)
        r = self.rows[direction]
        out[r] = z[self.nbrs[direction]] - z[r]
        if direction in ("u-", "v-"):
            out[r] = -out[r]
        return out

    def pair_diff(self, z: np.ndarray, su: str, sv: str) -> np.ndarray:
        """Stacked (du, dv) differences for one sign pair, shape (n, 2)."""
        return np.stack(
            [self.apply_diff(z, "u" + su), self.apply_diff(z, "v" + sv)], axis=1
        )


def build_diff_matrices(
    mask: DomainMask, index_map: IndexMap, subdomains: DirectionalSubdomains
) -> dict:
    """One-sided difference matrix per direction.

    Row i reads -1 at i and +1 at the neighbor index when the neighbor is
    inside, and is zero otherwise (for the backward directions the signs are
    +1 at i and -1 at the neighbor, i.e. the difference keeps its analytic
    orientation z_i - z_neighbor).
    """
    n = index_map.n
    fwd = index_map.forward
    out = {}
    for d in DIRECTIONS:
        du, dv = _OFFSETS[d]
        sub = subdomains.masks[d]
        # column-major pixel order for deterministic triplets
        vs, us = np.nonzero(sub.T)
        rows = fwd[us, vs]
        nbr = fwd[us + du, vs + dv]
        if d in ("u+", "v+"):
            data = np.concatenate([-np.ones(rows.size), np.ones(rows.size)])
        else:
            data = np.concatenate([np.ones(rows.size), -np.ones(rows.size)])
        coo = sp.coo_matrix(
            (data, (np.concatenate([rows, rows]), np.concatenate([rows, nbr]))),
            shape=(n, n),
        )
        mat = coo.tocsr()
        mat.sort_indices()
        out[d] = mat
    return out


def build_divergence_pair(diff: dict) -> tuple:
    """Half-averaged adjoints pairing forward and backward differences."""
    d_u = (0.5 * (diff["u+"].T + diff["u-"].T)).tocsr()
    d_v = (0.5 * (diff["v+"].T + diff["v-"].T)).tocsr()
    d_u.sort_indices()
    d_v.sort_indices()
    return d_u, d_v


def build_laplacian(
    mask: DomainMask, index_map: IndexMap, subdomains: DirectionalSubdomains
) -> sp.csr_matrix:
    """Connectivity Laplacian: degree on the diagonal, -1 for inside neighbors.

    Equals 0.5 * sum over the four directions of DᵀD; assembled directly from
    the neighbor structure so entries are exact integers.
    """
    n = index_map.n
    fwd = index_map.forward
    rows = [np.arange(n, dtype=np.int64)]
    cols = [np.arange(n, dtype=np.int64)]
    deg = np.zeros(n)
    data = [deg]  # filled below, kept first so the diagonal comes first
    for d in DIRECTIONS:
        du, dv = _OFFSETS[d]
        sub = subdomains.masks[d]
        vs, us = np.nonzero(sub.T)
        r = fwd[us, vs]
        c = fwd[us + du, vs + dv]
        np.add.at(deg, r, 1.0)
        rows.append(r)
        cols.append(c)
        data.append(-np.ones(r.size))
    lap = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    lap.sort_indices()
    return lap


def build_operator_set(mask: DomainMask) -> SparseOperatorSet:
    """Assemble every operator for a mask once; reuse across methods."""
    index_map = build_index_map(mask)
    subdomains = neighbor_subdomains(mask)
    diff = build_diff_matrices(mask, index_map, subdomains)
    diff_t = {d: diff[d].T.tocsr() for d in DIRECTIONS}
    for m in diff_t.values():
        m.sort_indices()
    d_u, d_v = build_divergence_pair(diff)
    lap = build_laplacian(mask, index_map, subdomains)
    fwd = index_map.forward
    rows = {}
    nbrs = {}
    for d in DIRECTIONS:
        du, dv = _OFFSETS[d]
        vs, us = np.nonzero(subdomains.masks[d].T)
        rows[d] = fwd[us, vs]
        nbrs[d] = fwd[us + du, vs + dv]
    omega_uv = {}
    for su, sv in SIGN_PAIRS:
        pair = subdomains.pairs[(su, sv)]
        vec = np.zeros(index_map.n, dtype=bool)
        vs, us = np.nonzero(pair.T)
        vec[fwd[us, vs]] = True
        omega_uv[(su, sv)] = vec
    return SparseOperatorSet(
        mask=mask,
        index_map=index_map,
        subdomains=subdomains,
        diff=diff,
        diff_t=diff_t,
        d_u=d_u,
        d_v=d_v,
        laplacian=lap,
        rows=rows,
        nbrs=nbrs,
        omega_uv=omega_uv,
    )


def lambda_diagonal(ops: SparseOperatorSet, prior: PriorField) -> np.ndarray:
    """Vector of pointwise prior weights in unknown order."""
    lam = ops.index_map.to_vector(prior.lam)
    if (lam < 0).any():
        raise ValueError("lambda must be non-negative")
    return lam


def build_quadratic_system(
    ops: SparseOperatorSet, g: GradientField, prior: PriorField
) -> tuple:
    """Normal equations of the least-squares functional: A z = b with
    A = L + diag(lambda) and b = D_u p + D_v q + diag(lambda) z0."""
    lam = lambda_diagonal(ops, prior)
    deg = ops.laplacian.diagonal()
    if ((deg == 0) & (lam == 0)).any():
        raise ValueError(
            "isolated pixel without prior weight makes the system singular"
        )
    a = (ops.laplacian + sp.diags(lam)).tocsr()
    a.sort_indices()
    p = ops.index_map.to_vector(g.p)
    q = ops.index_map.to_vector(g.q)
    z0 = ops.index_map.to_vector(prior.z0)
    b = ops.d_u @ p + ops.d_v @ q + lam * z0
    return a, b


def quadratic_energy(
    ops: SparseOperatorSet, z: np.ndarray, g: GradientField, prior: PriorField
) -> float:
    """Discrete least-squares energy: half the squared one-sided residuals
    in all four directions plus the weighted prior term."""
    p = ops.index_map.to_vector(g.p)
    q = ops.index_map.to_vector(g.q)
    lam = lambda_diagonal(ops, prior)
    z0 = ops.index_map.to_vector(prior.z0)
    total = 0.0
    for d, data in (("u+", p), ("u-", p), ("v+", q), ("v-", q)):
        r = ops.rows[d]
        res = ops.apply_diff(z, d)[r] - data[r]
        total += 0.5 * float(res @ res)
    total += float(lam @ (z - z0) ** 2)
    return total


def dump_matrix_market(path, matrix) -> None:
    """Debug dump of any assembled operator as MatrixMarket coordinate text."""
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))
