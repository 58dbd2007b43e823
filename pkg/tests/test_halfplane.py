import numpy as np
import pytest
from scipy.special import jn_zeros

from stepgl import halfplane as hp
from stepgl import spectral1d as s1
from stepgl.halfplane import HalfDiskMesh, WedgeParams


@pytest.fixture(scope="module")
def coarse_mesh():
    return HalfDiskMesh.build(np.pi / 2, 8.0, 0.4)


def test_wedge_potential_right_angle_cases():
    params = WedgeParams(np.pi / 2, -1.0)
    out = hp.wedge_potential(params, np.array([[1.0, 3.0], [-1.0, 3.0]]))
    np.testing.assert_allclose(out[0], [0.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(out[1], [0.0, 1.0], atol=1e-14)


def test_wedge_potential_boundary_term_vanishes():
    # on x2 = 0, x1 > 0 the acute-angle correction term is killed by x2
    params = WedgeParams(np.pi / 3, 0.5)
    out = hp.wedge_potential(params, np.array([[2.0, 0.0], [0.7, 0.0]]))
    np.testing.assert_allclose(out[:, 1], [2.0, 0.7], atol=1e-14)
    np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-14)


def test_wedge_potential_continuous_across_edge():
    for alpha, a in ((np.pi / 3, 0.5), (2 * np.pi / 3, -0.4), (np.pi / 2, -1.0)):
        params = WedgeParams(alpha, a)
        r = 1.7
        eps = 1e-9
        below = hp.wedge_potential(params, [[r * np.cos(alpha - eps), r * np.sin(alpha - eps)]])
        above = hp.wedge_potential(params, [[r * np.cos(alpha + eps), r * np.sin(alpha + eps)]])
        np.testing.assert_allclose(below, above, atol=1e-7)


@pytest.mark.parametrize("alpha,a", [(np.pi / 3, 0.5), (2 * np.pi / 3, -0.4)])
def test_wedge_potential_curl(alpha, a):
    # finite-difference curl of the sampled potential recovers the step field
    params = WedgeParams(alpha, a)
    d = 1e-5
    for theta, expected in ((alpha / 2, 1.0), ((alpha + np.pi) / 2, a)):
        x = np.array([2.0 * np.cos(theta), 2.0 * np.sin(theta)])
        px = hp.wedge_potential(params, [x + [d, 0], x - [d, 0]])
        py = hp.wedge_potential(params, [x + [0, d], x - [0, d]])
        curl = (px[0, 1] - px[1, 1]) / (2 * d) - (py[0, 0] - py[1, 0]) / (2 * d)
        assert abs(curl - expected) < 1e-6


def test_wedge_potential_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        hp.wedge_potential(WedgeParams(1.0, -0.5), [[0.5, -0.5]])


def test_params_validation():
    with pytest.raises(ValueError):
        WedgeParams(0.0, -1.0)
    with pytest.raises(ValueError):
        WedgeParams(np.pi, -1.0)
    with pytest.raises(ValueError):
        WedgeParams(1.0, 0.0)
    with pytest.raises(ValueError):
        WedgeParams(1.0, 1.5)


def test_mesh_rejects_degenerate():
    with pytest.raises(ValueError):
        HalfDiskMesh.build(1.0, 8.0, 3.0)
    with pytest.raises(ValueError):
        HalfDiskMesh.build(1.0, -1.0, 0.1)


def test_assembled_operator_exactly_hermitian(coarse_mesh):
    A = hp.assemble_magnetic_laplacian(WedgeParams(np.pi / 2, -1.0), coarse_mesh)
    assert abs((A - A.getH()).toarray()).max() == 0.0


def test_zero_potential_dirichlet_neumann_laplacian(coarse_mesh):
    # scale = 0: lowest eigenvalue of the Laplacian on the half-disk with
    # Dirichlet arc and Neumann diameter is (j_{0,1}/R)^2
    params = WedgeParams(np.pi / 2, -1.0)
    A = hp.assemble_magnetic_laplacian(params, coarse_mesh, scale=0.0)
    lam = np.linalg.eigvalsh(A.toarray())[0]
    analytic = (jn_zeros(0, 1)[0] / coarse_mesh.R) ** 2
    assert abs(lam - analytic) < 2e-3
    lam_iter, _, _ = hp._lowest_eigenpair_sparse(A, hp._bump_start(coarse_mesh), 1e-10)
    assert abs(lam_iter - lam) < 1e-9


@pytest.mark.parametrize("alpha,a", [(np.pi / 2, -1.0), (np.pi / 3, -0.5), (2 * np.pi / 3, -1.0)])
def test_iterative_matches_dense_oracle(alpha, a):
    mesh = HalfDiskMesh.build(alpha, 8.0, 0.4)
    assert mesh.n_nodes <= 3000
    res = hp.compute_mu(WedgeParams(alpha, a), mesh=mesh)
    dense = hp.compute_mu_dense(WedgeParams(alpha, a), mesh)
    assert abs(res.eigenvalue - dense) < 1e-8


def test_mu_right_angle_trapping(theta0):
    res = hp.compute_mu(WedgeParams(np.pi / 2, -1.0), R=16.0, h=0.1)
    assert res.eigenvalue < theta0 - 0.05
    assert res.eigenvalue > 0.4
    # L2 normalization contract
    nrm = np.real(np.vdot(res.eigenvector, res.mesh.mass * res.eigenvector))
    assert abs(nrm - 1.0) < 1e-10
    assert res.residual < 1e-8


def test_mu_uniform_field_validation(theta0):
    # a = 1 removes the edge; the half-plane value is Theta0 (coarse check
    # here, the R=20/h=0.05 tight check runs in the acceptance suite)
    res = hp.compute_mu(WedgeParams(np.pi / 2, 1.0), R=12.0, h=0.1)
    assert abs(res.eigenvalue - theta0) < 2e-2
    assert res.warnings  # margin to the essential floor ~ 0


def test_mu_monotone_in_truncation_radius():
    params = WedgeParams(np.pi / 2, -1.0)
    mus = [hp.compute_mu(params, R=R, h=0.1).eigenvalue for R in (10.0, 12.0, 14.0)]
    assert mus[1] <= mus[0] + 1e-9
    assert mus[2] <= mus[1] + 1e-9


def test_mu_below_floor_plus_discretization(theta0):
    # min-max against the essential floor: mu <= |a|*Theta0 + C*h
    res = hp.compute_mu(WedgeParams(2.2, -0.8), R=15.0, h=0.1)
    assert res.eigenvalue <= 0.8 * theta0 + 0.05


def test_eigenvector_agmon_decay(theta0):
    res = hp.compute_mu(WedgeParams(np.pi / 2, -1.0), R=28.0, h=0.1)
    r, prof = hp.radial_profile(res)
    i1 = np.searchsorted(r, res.mesh.R / 2)
    i2 = np.searchsorted(r, 3 * res.mesh.R / 4)
    assert prof[i1] / prof[i2] >= 10.0


def test_gauge_covariance(theta0):
    # A -> A + grad(chi), u -> exp(i chi) u leaves the Rayleigh quotient
    # unchanged (quadratic chi keeps the link integrals exact)
    rng = np.random.default_rng(7)
    params = WedgeParams(2.0, -0.5)
    mesh = HalfDiskMesh.build(2.0, 10.0, 0.2)
    K, m = hp.assemble_forms(params, mesh)
    res = hp.compute_mu(params, mesh=mesh)
    u = res.eigenvector
    pts = np.stack([mesh.x1, mesh.x2], axis=1)
    rq0 = np.real(np.vdot(u, K @ u)) / np.real(np.vdot(u, m * u))
    for _ in range(5):
        c = rng.normal(size=5)
        chi = c[0] * pts[:, 0] + c[1] * pts[:, 1] + c[2] * pts[:, 0] ** 2 \
            + c[3] * pts[:, 0] * pts[:, 1] + c[4] * pts[:, 1] ** 2
        grad_chi = lambda x: np.stack([c[0] + 2 * c[2] * x[:, 0] + c[3] * x[:, 1],
                                       c[1] + c[3] * x[:, 0] + 2 * c[4] * x[:, 1]], axis=1)
        K2, _ = hp.assemble_forms(params, mesh, extra_potential=grad_chi)
        u2 = np.exp(1j * chi) * u
        rq1 = np.real(np.vdot(u2, K2 @ u2)) / np.real(np.vdot(u2, m * u2))
        assert abs(rq1 - rq0) < 1e-8


def test_essential_floor_values(theta0):
    assert abs(hp.essential_floor(-1.0) - 0.59) <= 0.005
    assert abs(hp.essential_floor(0.5) - 0.295) <= 0.003
    assert abs(hp.essential_floor(-0.25) - 0.1475) <= 0.002
    with pytest.raises(ValueError):
        hp.essential_floor(0.0)


def test_essential_floor_requires_cache(theta0):
    saved = dict(s1._theta0_cache)
    try:
        s1.clear_theta0_cache()
        with pytest.raises(RuntimeError, match="compute_theta0"):
            hp.essential_floor(-1.0)
    finally:
        s1._theta0_cache.update(saved)


def test_bound_state_certification(theta0):
    rep = hp.check_bound_state(WedgeParams(np.pi / 2, -1.0), R=16.0, h=0.1)
    assert rep["status"] == "bound"
    assert rep["is_bound"] is True
    assert rep["margin"] > 2.0 * rep["error_estimate"]


def test_bound_state_uniform_field_inconclusive(theta0):
    rep = hp.check_bound_state(WedgeParams(np.pi / 2, 1.0), R=12.0, h=0.15)
    assert rep["status"] == "inconclusive"
    assert rep["is_bound"] is False


def test_determinism_over_parameter_scan(theta0):
    # fixed order scan over (alpha, a): bit-identical results run-to-run
    pairs = [(alpha, a) for alpha in (np.pi / 6, np.pi / 2, 5 * np.pi / 6)
             for a in (-1.0, -0.5)]

    def scan():
        out = []
        for alpha, a in pairs:
            res = hp.compute_mu(WedgeParams(alpha, a), R=10.0, h=0.25)
            out.append((res.eigenvalue, res.eigenvector))
        return out

    first, second = scan(), scan()
    for (e1, v1), (e2, v2) in zip(first, second):
        assert e1 == e2
        assert np.array_equal(v1, v2)
