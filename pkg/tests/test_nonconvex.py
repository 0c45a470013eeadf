import numpy as np
import pytest

from normint.domain import SIGN_PAIRS, DomainMask
from normint.fields import GradientField, PriorField
from normint.nonconvex import (
    IpianoConfig,
    PhiFunction,
    fidelity_energy,
    grad_f,
    integrate_nonconvex,
    phi_deriv,
    phi_eval,
    prox_g,
    total_energy,
    _gvec,
)
from normint.operators import build_operator_set
from normint.quadratic import integrate_quadratic
from normint.surfaces import NoiseSpec, add_gaussian_noise, generate_surface, rmse_aligned


def test_phi_values_at_zero_and_infinity():
    phi1 = PhiFunction("phi1", beta=0.5)
    assert phi_eval(phi1, 0.0) == pytest.approx(np.log(0.25))
    assert phi_deriv(phi1, 0.0) == 0.0
    phi2 = PhiFunction("phi2", gamma=2.0)
    assert phi_eval(phi2, 0.0) == 0.0
    assert phi_eval(phi2, 100 * 2.0) > 0.9999


def test_phi_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for phi in (PhiFunction("phi1", beta=0.7), PhiFunction("phi2", gamma=1.3)):
        for s in rng.uniform(0.05, 5.0, size=20):
            fd = (phi_eval(phi, s + h) - phi_eval(phi, s - h)) / (2 * h)
            assert phi_deriv(phi, s) == pytest.approx(fd, rel=1e-6)


def test_grad_zero_at_perfect_fit():
    # a linear surface has identical forward and backward differences, so
    # every stencil residual vanishes simultaneously
    _, g, mask = generate_surface("plane", 12)
    ops = build_operator_set(mask)
    z = ops.index_map.to_vector(generate_surface("plane", 12)[0].z)
    gvec = _gvec(ops, g)
    for phi in (PhiFunction("phi1"), PhiFunction("phi2")):
        assert np.abs(grad_f(z, gvec, ops, phi)).max() < 1e-14


def finite_difference_gradient(z, gvec, ops, phi, h=1e-6):
    out = np.zeros_like(z)
    for i in range(z.shape[0]):
        zp = z.copy(); zp[i] += h
        zm = z.copy(); zm[i] -= h
        out[i] = (fidelity_energy(zp, gvec, ops, phi)
                  - fidelity_energy(zm, gvec, ops, phi)) / (2 * h)
    return out


def test_grad_matches_finite_differences_on_corner_domain(corner_ops):
    rng = np.random.default_rng(5)
    shape = corner_ops.mask.inside.shape
    g = GradientField(rng.normal(size=shape), rng.normal(size=shape))
    gvec = _gvec(corner_ops, g)
    z = rng.normal(size=corner_ops.n)
    phi = PhiFunction("phi1", beta=0.5)
    got = grad_f(z, gvec, corner_ops, phi)
    ref = finite_difference_gradient(z, gvec, corner_ops, phi)
    assert np.abs(got - ref).max() / np.abs(ref).max() < 1e-5


def test_grad_matches_finite_differences_random_masks():
    # the primary numerical check: both penalties, random masked domains
    rng = np.random.default_rng(11)
    for phi in (PhiFunction("phi1", beta=0.4), PhiFunction("phi2", gamma=0.8)):
        checked = 0
        while checked < 25:
            inside = rng.random((5, 5)) < 0.75
            if inside.sum() < 4:
                continue
            ops = build_operator_set(DomainMask(inside))
            g = GradientField(rng.normal(size=(5, 5)), rng.normal(size=(5, 5)))
            gvec = _gvec(ops, g)
            z = rng.normal(size=ops.n)
            got = grad_f(z, gvec, ops, phi)
            ref = finite_difference_gradient(z, gvec, ops, phi)
            scale = max(np.abs(ref).max(), 1e-9)
            assert np.abs(got - ref).max() / scale < 1e-4
            checked += 1


def test_phi2_large_gamma_approaches_quadratic_gradient():
    rng = np.random.default_rng(13)
    mask = DomainMask.full(8, 8)
    ops = build_operator_set(mask)
    g = GradientField(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    gvec = _gvec(ops, g)
    z = rng.normal(size=ops.n)
    gamma = 1e4
    scaled = gamma**2 * grad_f(z, gvec, ops, PhiFunction("phi2", gamma=gamma))
    # quadratic-penalty analogue of the same pairwise fidelity
    quad = np.zeros(ops.n)
    for su, sv in SIGN_PAIRS:
        m = ops.omega_uv[(su, sv)].astype(float)
        res = ops.pair_diff(z, su, sv) - gvec
        quad += ops.diff_t["u" + su] @ (m * res[:, 0])
        quad += ops.diff_t["v" + sv] @ (m * res[:, 1])
    quad *= 0.5
    cos = quad @ scaled / (np.linalg.norm(quad) * np.linalg.norm(scaled))
    assert cos > 0.999


def test_quadratic_phi_energy_equals_least_squares_on_interior():
    # with the penalty s^2 the pairwise fidelity double-counts each one-sided
    # residual exactly twice, so per interior pixel it equals the plain
    # half-weighted least-squares fidelity
    rng = np.random.default_rng(17)
    mask = DomainMask.full(6, 6)
    ops = build_operator_set(mask)
    g = GradientField(rng.normal(size=(6, 6)), rng.normal(size=(6, 6)))
    gvec = _gvec(ops, g)
    z = rng.normal(size=ops.n)
    interior = np.zeros((6, 6), dtype=bool)
    interior[1:-1, 1:-1] = True
    ivec = ops.index_map.to_vector(interior.astype(float)) > 0.5

    pair_sum = np.zeros(ops.n)
    for su, sv in SIGN_PAIRS:
        res = ops.pair_diff(z, su, sv) - gvec
        pair_sum += 0.25 * (res[:, 0] ** 2 + res[:, 1] ** 2)
    onesided = np.zeros(ops.n)
    for d, comp in (("u+", 0), ("u-", 0), ("v+", 1), ("v-", 1)):
        res = ops.apply_diff(z, d) - gvec[:, comp]
        onesided += 0.5 * res**2
    assert np.abs(pair_sum[ivec] - onesided[ivec]).max() < 1e-8


def test_prox_identity_and_halving():
    x = np.array([2.0, -4.0, 6.0])
    assert np.array_equal(prox_g(x, 0.7, np.zeros(3), np.zeros(3)), x)
    assert np.allclose(prox_g(x, 0.5, np.ones(3), np.zeros(3)), x / 2)


def test_prox_minimizes_objective():
    rng = np.random.default_rng(19)
    n = 30
    lam = rng.uniform(0, 2, size=n)
    z0 = rng.normal(size=n)
    x_hat = rng.normal(size=n)
    alpha1 = 0.37

    def objective(x):
        return 0.5 * np.sum((x - x_hat) ** 2) + alpha1 * np.sum(lam * (x - z0) ** 2)

    star = prox_g(x_hat, alpha1, lam, z0)
    base = objective(star)
    for _ in range(50):
        assert objective(star + rng.normal(scale=1e-3, size=n)) >= base


def test_monotone_energy_without_inertia():
    depth, g, mask = generate_surface("smooth_bumps", 24)
    noisy = add_gaussian_noise(g, NoiseSpec(sigma=0.05, seed=2), mask)
    res = integrate_nonconvex(
        noisy, mask=mask, phi=PhiFunction("phi1", beta=0.5),
        cfg=IpianoConfig(alpha2=0.0, iterations=150),
    )
    e = np.array(res.energies)
    assert np.all(e[1:] <= e[:-1] + 1e-9 * np.abs(e[:-1]))


def test_noiseless_smooth_stays_near_quadratic():
    depth, g, mask = generate_surface("smooth_bumps", 32)
    quad = integrate_quadratic(g, mask=mask)
    res = integrate_nonconvex(
        g, mask=mask, phi=PhiFunction("phi1", beta=0.5),
        cfg=IpianoConfig(iterations=300), z_init=quad.z,
    )
    e = np.array(res.energies)
    assert e[-1] <= e[0] + 1e-9
    rmse_q = rmse_aligned(quad.depth.z, depth.z)
    rmse_n = rmse_aligned(res.depth.z, depth.z)
    assert rmse_n <= rmse_q + 1e-3


def test_tent_init_sensitivity():
    depth, g, mask = generate_surface("tent_like", 48)
    noisy = add_gaussian_noise(g, NoiseSpec(sigma=0.01, seed=7), mask)
    phi = PhiFunction("phi1", beta=0.5)
    cfg = IpianoConfig(iterations=2000)
    ls = integrate_nonconvex(noisy, mask=mask, phi=phi, cfg=cfg)
    zero = integrate_nonconvex(noisy, mask=mask, phi=phi, cfg=cfg,
                               z_init=np.zeros(mask.count))
    rmse_ls = rmse_aligned(ls.depth.z, depth.z)
    rmse_zero = rmse_aligned(zero.depth.z, depth.z)
    assert rmse_ls < rmse_zero


def test_vase_beta_sweep_interior_optimum():
    # the bracket straddles both failure regimes: a scale below the noise
    # residuals (staircasing) and one above the silhouette slopes (jumps
    # treated as inliers, over-smoothing); the middle scale wins
    depth, g, _ = generate_surface("vase_like", 48, jump=8.0)
    mask = DomainMask.full(48, 48)
    noisy = add_gaussian_noise(g, NoiseSpec(sigma=0.01, seed=5), mask)
    cfg = IpianoConfig(iterations=2000)
    errs = []
    for beta in (0.02, 0.05, 0.3):
        res = integrate_nonconvex(noisy, mask=mask,
                                  phi=PhiFunction("phi1", beta=beta), cfg=cfg)
        errs.append(rmse_aligned(res.depth.z, depth.z))
    assert errs[1] < errs[0]
    assert errs[1] < errs[2]


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        PhiFunction("phi3")
    with pytest.raises(ValueError):
        PhiFunction("phi1", beta=0.0)
    with pytest.raises(ValueError):
        IpianoConfig(alpha2=1.0)
