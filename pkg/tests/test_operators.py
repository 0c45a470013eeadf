import numpy as np
import pytest
import scipy.sparse as sp

from normint.domain import DomainMask, build_index_map, neighbor_subdomains
from normint.fields import GradientField, PriorField
from normint.operators import (
    build_diff_matrices,
    build_divergence_pair,
    build_operator_set,
    build_quadratic_system,
    dump_matrix_market,
    quadratic_energy,
)
from conftest import random_mask

# Known entry-for-entry operators of the eight-pixel corner domain.
D_U_PLUS_REF = np.array([
    [-1, 1, 0, 0, 0, 0, 0, 0],
    [0, -1, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, -1, 1, 0, 0, 0],
    [0, 0, 0, 0, -1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, -1, 1],
    [0, 0, 0, 0, 0, 0, 0, 0],
], dtype=float)

LAPLACIAN_REF = np.array([
    [2, -1, 0, -1, 0, 0, 0, 0],
    [-1, 3, -1, 0, -1, 0, 0, 0],
    [0, -1, 2, 0, 0, -1, 0, 0],
    [-1, 0, 0, 3, -1, 0, -1, 0],
    [0, -1, 0, -1, 4, -1, 0, -1],
    [0, 0, -1, 0, -1, 2, 0, 0],
    [0, 0, 0, -1, 0, 0, 2, -1],
    [0, 0, 0, 0, -1, 0, -1, 2],
], dtype=float)

D_U_REF = 0.5 * np.array([
    [-1, -1, 0, 0, 0, 0, 0, 0],
    [1, 0, -1, 0, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, -1, -1, 0, 0, 0],
    [0, 0, 0, 1, 0, -1, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, -1, -1],
    [0, 0, 0, 0, 0, 0, 1, 1],
], dtype=float)

# Row 7 follows from the half-averaged-adjoint definition: pixel (1,2) has its
# left neighbor at index 4 and itself at index 7 in the v-direction.
D_V_REF = 0.5 * np.array([
    [-1, 0, 0, -1, 0, 0, 0, 0],
    [0, -1, 0, 0, -1, 0, 0, 0],
    [0, 0, -1, 0, 0, -1, 0, 0],
    [1, 0, 0, 0, 0, 0, -1, 0],
    [0, 1, 0, 0, 0, 0, 0, -1],
    [0, 0, 1, 0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0, 0, 1, 0],
    [0, 0, 0, 0, 1, 0, 0, 1],
], dtype=float)


def test_corner_d_u_plus_matches_reference(corner_ops):
    assert np.array_equal(corner_ops.d_u_plus.toarray(), D_U_PLUS_REF)
    # rows 2, 5, 7 (pixels without a lower neighbor) are exactly zero
    dense = corner_ops.d_u_plus.toarray()
    for row in (2, 5, 7):
        assert not dense[row].any()


def test_corner_laplacian_matches_reference(corner_ops):
    assert np.array_equal(corner_ops.laplacian.toarray(), LAPLACIAN_REF)


def test_corner_divergence_pair_matches_reference(corner_ops):
    assert np.array_equal(corner_ops.d_u.toarray(), D_U_REF)
    assert np.array_equal(corner_ops.d_v.toarray(), D_V_REF)


def test_two_pixel_row_domain():
    ops = build_operator_set(DomainMask(np.ones((1, 2), dtype=bool)))
    assert np.array_equal(ops.d_v_plus.toarray(), [[-1, 1], [0, 0]])
    assert not ops.d_u_plus.toarray().any()


def test_one_minus_one_per_nonzero_row():
    rng = np.random.default_rng(5)
    mask = random_mask(rng, 6, 6)
    im = build_index_map(mask)
    sub = neighbor_subdomains(mask)
    mats = build_diff_matrices(mask, im, sub)
    for d, m in mats.items():
        dense = m.toarray()
        nz = dense.any(axis=1)
        assert np.array_equal(np.sort(dense[nz], axis=1)[:, [0, -1]],
                              np.tile([-1.0, 1.0], (nz.sum(), 1)))
        sub_lin = np.zeros(im.n, dtype=bool)
        vs, us = np.nonzero(sub.masks[d].T)
        sub_lin[im.forward[us, vs]] = True
        assert np.array_equal(nz, sub_lin)


def test_stencil_evaluation_oracle():
    # (D_u^+ z)_i equals z(u+1,v) - z(u,v) for every subdomain pixel
    rng = np.random.default_rng(17)
    mask = random_mask(rng, 6, 6)
    ops = build_operator_set(mask)
    im = ops.index_map
    for _ in range(10):
        z = rng.normal(size=im.n)
        produced = ops.d_u_plus @ z
        for i, (u, v) in enumerate(im.backward):
            j = im.forward[u + 1, v] if u + 1 < mask.height else -1
            if j >= 0:
                assert produced[i] == pytest.approx(z[j] - z[i], abs=1e-12)
            else:
                assert produced[i] == 0.0
        # matrix-free path agrees with the assembled matrix
        assert np.allclose(ops.apply_diff(z, "u+"), produced)
        for d in ("u-", "v+", "v-"):
            assert np.allclose(ops.apply_diff(z, d), ops.diff[d] @ z)


def test_laplacian_is_half_sum_of_normal_products():
    rng = np.random.default_rng(23)
    for _ in range(5):
        mask = random_mask(rng, 7, 5)
        ops = build_operator_set(mask)
        total = sum(
            (ops.diff[d].T @ ops.diff[d] for d in ("u+", "u-", "v+", "v-")),
            start=sp.csr_matrix((ops.n, ops.n)),
        )
        assert (abs(ops.laplacian - 0.5 * total)).max() == 0.0


def test_laplacian_row_sums_zero():
    rng = np.random.default_rng(29)
    mask = random_mask(rng, 8, 8)
    ops = build_operator_set(mask)
    assert np.allclose(ops.laplacian @ np.ones(ops.n), 0.0)


def test_corner_quadratic_matrix_zero_lambda(corner_mask, corner_ops):
    shape = corner_mask.inside.shape
    g = GradientField(np.zeros(shape), np.zeros(shape))
    prior = PriorField(np.zeros(shape), np.zeros(shape))
    a, b = build_quadratic_system(corner_ops, g, prior)
    assert np.array_equal(a.toarray(), LAPLACIAN_REF)
    assert np.array_equal(a.diagonal(), [2, 3, 2, 3, 4, 2, 2, 2])
    assert np.allclose(b, 0.0)


def test_zero_data_gives_zero_rhs(corner_mask, corner_ops):
    shape = corner_mask.inside.shape
    g = GradientField(np.zeros(shape), np.zeros(shape))
    prior = PriorField(np.zeros(shape), np.full(shape, 1e-6))
    _, b = build_quadratic_system(corner_ops, g, prior)
    assert np.allclose(b, 0.0)


def test_negative_lambda_rejected(corner_mask, corner_ops):
    shape = corner_mask.inside.shape
    g = GradientField(np.zeros(shape), np.zeros(shape))
    prior = PriorField(np.zeros(shape), np.full(shape, -1.0))
    with pytest.raises(ValueError):
        build_quadratic_system(corner_ops, g, prior)


def dense_normal_equations(ops, g, prior):
    """Independent dense oracle: accumulate the quadratic form of the energy
    0.5*sum_dir ||D_d z - data||^2 + ||sqrt(lam)(z - z0)||^2 symbolically and
    read off A and b from the expansion z'Az - 2 b'z + const."""
    n = ops.n
    im = ops.index_map
    p = im.to_vector(g.p)
    q = im.to_vector(g.q)
    lam = im.to_vector(prior.lam)
    z0 = im.to_vector(prior.z0)
    a = np.zeros((n, n))
    b = np.zeros(n)
    for d, data in (("u+", p), ("u-", p), ("v+", q), ("v-", q)):
        dm = ops.diff[d].toarray()
        for i in range(n):
            row = dm[i]
            if not row.any():
                continue
            a += 0.5 * np.outer(row, row)
            b += 0.5 * row * data[i]
    a += np.diag(lam)
    b += lam * z0
    return a, b


def test_quadratic_system_matches_dense_oracle():
    rng = np.random.default_rng(41)
    mask = DomainMask.full(4, 4)
    ops = build_operator_set(mask)
    g = GradientField(rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))
    prior = PriorField(rng.normal(size=(4, 4)), np.ones((4, 4)))
    a, b = build_quadratic_system(ops, g, prior)
    a_ref, b_ref = dense_normal_equations(ops, g, prior)
    assert np.allclose(a.toarray(), a_ref, atol=1e-12)
    assert np.allclose(b, b_ref, atol=1e-12)
    # at most five non-zeros per row, symmetric, diagonally dominant
    per_row = np.diff(a.indptr)
    assert per_row.max() <= 5
    assert (abs(a - a.T)).nnz == 0
    dense = a.toarray()
    assert np.all(np.abs(np.diag(dense)) >= np.sum(np.abs(dense), axis=1) - np.abs(np.diag(dense)) - 1e-12)


def test_system_matches_energy_gradient():
    # A z - b equals half the gradient of the discrete energy at z
    rng = np.random.default_rng(43)
    mask = DomainMask(random_mask(rng, 5, 5).inside)
    ops = build_operator_set(mask)
    shape = mask.inside.shape
    g = GradientField(rng.normal(size=shape), rng.normal(size=shape))
    prior = PriorField(rng.normal(size=shape), np.full(shape, 0.5))
    a, b = build_quadratic_system(ops, g, prior)
    z = rng.normal(size=ops.n)
    grad = a @ z - b
    h = 1e-6
    for i in range(ops.n):
        zp = z.copy(); zp[i] += h
        zm = z.copy(); zm[i] -= h
        fd = (quadratic_energy(ops, zp, g, prior) - quadratic_energy(ops, zm, g, prior)) / (2 * h)
        assert fd == pytest.approx(2.0 * grad[i], rel=1e-4, abs=1e-6)


def test_constant_in_null_space_without_prior():
    rng = np.random.default_rng(40)  # this draw has no isolated pixels
    mask = random_mask(rng, 6, 6)
    ops = build_operator_set(mask)
    shape = mask.inside.shape
    g = GradientField(np.zeros(shape), np.zeros(shape))
    assert (ops.laplacian.diagonal() > 0).all()
    prior = PriorField(np.zeros(shape), np.zeros(shape))
    a, _ = build_quadratic_system(ops, g, prior)
    assert np.allclose(a @ np.full(ops.n, 3.7), 0.0, atol=1e-12)


def test_positive_definite_with_lambda_somewhere():
    mask = DomainMask.full(4, 4)
    ops = build_operator_set(mask)
    lam = np.zeros((4, 4)); lam[0, 0] = 1.0
    g = GradientField(np.zeros((4, 4)), np.zeros((4, 4)))
    a, _ = build_quadratic_system(ops, g, PriorField(np.zeros((4, 4)), lam))
    eigs = np.linalg.eigvalsh(a.toarray())
    assert eigs.min() > 0


def test_isolated_pixel_rejected_without_prior():
    inside = np.zeros((3, 3), dtype=bool)
    inside[0, 0] = True
    inside[2, 2] = True
    inside[2, 1] = True
    mask = DomainMask(inside)
    ops = build_operator_set(mask)
    shape = inside.shape
    g = GradientField(np.zeros(shape), np.zeros(shape))
    with pytest.raises(ValueError, match="isolated"):
        build_quadratic_system(ops, g, PriorField(np.zeros(shape), np.zeros(shape)))
    # with a prior on the isolated pixel the system is accepted
    lam = np.zeros(shape); lam[0, 0] = 1.0
    build_quadratic_system(ops, g, PriorField(np.zeros(shape), lam))


def test_repeated_assembly_bit_identical(corner_mask):
    a = build_operator_set(corner_mask)
    b = build_operator_set(corner_mask)
    for d in ("u+", "u-", "v+", "v-"):
        assert np.array_equal(a.diff[d].data, b.diff[d].data)
        assert np.array_equal(a.diff[d].indices, b.diff[d].indices)
        assert np.array_equal(a.diff[d].indptr, b.diff[d].indptr)


def test_matrix_market_dump_round_trip(tmp_path, corner_ops):
    import scipy.io

    path = tmp_path / "lap.mtx"
    dump_matrix_market(path, corner_ops.laplacian)
    back = scipy.io.mmread(path)
    assert np.array_equal(back.toarray(), LAPLACIAN_REF)
