import numpy as np
import pytest

from stepgl import diagnostics as diag
from stepgl import gldomain as gl


@pytest.fixture(scope="module")
def geometry():
    return gl.build_geometry(1.0, 0.0, -1.0)


@pytest.fixture(scope="module")
def mesh(geometry):
    return gl.DiskMesh(geometry, 96)


@pytest.fixture(scope="module")
def fieldF(geometry, mesh):
    return gl.compute_F(geometry, mesh)


@pytest.fixture(scope="module")
def seeds(geometry, theta0):
    return gl.prepare_seeds(geometry, 1.83, R=12.0, h=0.12)


@pytest.fixture(scope="module")
def state(geometry, mesh, seeds):
    return gl.minimize_GL(geometry, 8.0, 1.83, mesh, gl.GLOptions(seeds=seeds))


@pytest.fixture(scope="module")
def eff_energies(seeds):
    return [{"E": s["eff"].energy, "mu": s["mu"]} for s in seeds]


def _random_state(mesh, fieldF, seed=0):
    rng = np.random.default_rng(seed)
    psi = 0.3 * (rng.standard_normal(mesh.n_nodes) + 1j * rng.standard_normal(mesh.n_nodes))
    st = gl.GLState(psi=psi, A=fieldF.F, kappa=8.0, H=14.64, energy=0.0,
                    breakdown={}, circ=fieldF.circ)
    st.breakdown = gl.evaluate_GL(st, None, mesh)
    st.energy = st.breakdown["energy"]
    return st


def test_local_energy_total_matches_evaluate(geometry, mesh, fieldF):
    st = _random_state(mesh, fieldF)
    out = diag.local_energy(st, geometry, mesh, np.ones(mesh.n_nodes, bool))
    assert abs(out["E"] - st.energy) <= 1e-12 * max(1.0, abs(st.energy))


def test_local_energy_empty_region(geometry, mesh, fieldF):
    st = _random_state(mesh, fieldF)
    assert diag.local_energy(st, geometry, mesh, np.zeros(mesh.n_nodes, bool))["E0"] == 0.0


def test_local_energy_additive_over_disjoint_regions(geometry, mesh, fieldF):
    st = _random_state(mesh, fieldF)
    r1 = mesh.x < -0.3
    r2 = mesh.x > 0.3
    e1 = diag.local_energy(st, geometry, mesh, r1)["E0"]
    e2 = diag.local_energy(st, geometry, mesh, r2)["E0"]
    e12 = diag.local_energy(st, geometry, mesh, r1 | r2)["E0"]
    assert abs(e12 - (e1 + e2)) <= 1e-12 * max(1.0, abs(e12))


def test_neighborhood_mask(geometry, mesh):
    nb = diag.Neighborhood.around(mesh, geometry.points[0], 0.5)
    d = np.sqrt((mesh.x - 1.0) ** 2 + mesh.y**2)
    assert np.array_equal(nb.mask, d <= 0.5)


def test_concentration_report_structure(state, geometry, mesh, eff_energies):
    rep = diag.concentration_report(state, geometry, mesh, 0.6, eff_energies)
    assert rep.active_set == [0, 1]
    assert rep.total["l4_fraction_inside"] > 0.9
    for p in rep.per_point:
        assert p["l4_mass"] >= 0
        assert p["mismatch_with_2E"] == pytest.approx(
            abs(p["l4_mass"] + 2 * p["E_eff"]))
        assert p["mismatch_with_2E_over_b"] == pytest.approx(
            abs(p["l4_mass"] + 2 * p["E_eff"] / state.b))
    # symmetric geometry: both neighborhoods carry the same mass
    assert rep.per_point[0]["l4_mass"] == pytest.approx(
        rep.per_point[1]["l4_mass"], rel=0.05)
    assert rep.better_normalization in ("2E", "2E_over_b")


def test_concentration_rejects_overlapping_neighborhoods(state, geometry, mesh, eff_energies):
    with pytest.raises(ValueError, match="disjoint"):
        diag.concentration_report(state, geometry, mesh, 1.2, eff_energies)


def test_concentration_invariant_under_phase_and_gauge(state, geometry, mesh, eff_energies):
    rep0 = diag.concentration_report(state, geometry, mesh, 0.5, eff_energies)
    # global phase rotation
    st1 = gl.GLState(psi=state.psi * np.exp(1j * 0.7), A=state.A, kappa=state.kappa,
                     H=state.H, energy=state.energy, breakdown=state.breakdown,
                     circ=state.circ)
    rep1 = diag.concentration_report(st1, geometry, mesh, 0.5, eff_energies)
    # gauge transformation (linear chi keeps trapezoid integrals exact)
    c = (0.3, -0.2)
    chi = c[0] * mesh.node_x + c[1] * mesh.node_y
    st2 = gl.GLState(psi=state.psi * np.exp(1j * state.kappa * state.H * chi[mesh.inside]),
                     A=(state.A[0] + c[0], state.A[1] + c[1]), kappa=state.kappa,
                     H=state.H, energy=0.0, breakdown={}, circ=None)
    st2.breakdown = gl.evaluate_GL(st2, geometry, mesh)
    st2.energy = st2.breakdown["energy"]
    rep2 = diag.concentration_report(st2, geometry, mesh, 0.5, eff_energies)
    for rep in (rep1, rep2):
        for j in range(2):
            assert abs(rep.per_point[j]["mismatch_with_2E"]
                       - rep0.per_point[j]["mismatch_with_2E"]) < 1e-8
            assert abs(rep.per_point[j]["mismatch_with_2E_over_b"]
                       - rep0.per_point[j]["mismatch_with_2E_over_b"]) < 1e-8


def test_decay_profile(state, geometry, mesh):
    out1 = diag.decay_profile(state, geometry, mesh, ell=0.3)
    out2 = diag.decay_profile(state, geometry, mesh, ell=0.6)
    assert out1["status"] == "ok"
    assert out1["fitted_rate"] > 0
    assert out2["weighted_mass"] <= out1["weighted_mass"]   # monotone in ell


def test_decay_profile_normal_state(geometry, mesh, fieldF):
    st = gl.GLState(psi=np.zeros(mesh.n_nodes, complex), A=fieldF.F, kappa=8.0,
                    H=14.64, energy=0.0, breakdown={}, circ=fieldF.circ)
    out = diag.decay_profile(st, geometry, mesh, ell=0.3)
    assert out["fitted_rate"] is None
    assert "no decay" in out["status"]


def test_critical_fields_ladder(geometry, theta0):
    rep = diag.critical_fields(geometry, 20.0, [0.50996, 0.50996], b=1.8)
    assert rep.H_C2 == pytest.approx(20.0)
    assert rep.H_int == pytest.approx(20.0 / theta0, rel=1e-6)
    assert abs(rep.H_int - 33.9) < 0.4
    assert rep.H_j[0] == pytest.approx(rep.H_j[1])
    assert rep.H_C2 < rep.H_int < rep.H_j[0] <= rep.H_j[1]
    assert rep.T == [0, 1]
    assert rep.active_set(2.1) == []


def test_critical_fields_monotone_active_set(geometry, theta0):
    rep = diag.critical_fields(geometry, 20.0, [0.52, 0.55])
    sets = [rep.active_set(b) for b in (1.75, 1.85, 1.95, 2.05)]
    for small, big in zip(sets, sets[1:]):
        assert set(big) <= set(small)


def test_critical_fields_exclusion(geometry, theta0):
    rep = diag.critical_fields(geometry, 20.0, [0.51, 0.93])
    assert len(rep.excluded) == 1
    assert rep.excluded[0][0] == 1
    assert "bound-state" in rep.excluded[0][1]
    assert len(rep.H_j) == 1


def test_phase_diagram_rows(geometry, theta0, seeds):
    mu = seeds[0]["mu"]
    rows = diag.phase_diagram(geometry, [8.0], [1.83, 1.2 / mu], grid_n=64)
    assert len(rows) == 2
    by_b = {round(r["b"], 4): r for r in rows}
    conc = by_b[round(1.83, 4)]
    norm = by_b[round(1.2 / mu, 4)]
    assert conc["regime"] == "near-all-points"
    assert conc["T"] == [0, 1]
    assert norm["regime"] == "normal"
    assert norm["T"] == []
    assert norm["mass_1"] < 1e-3 * conc["mass_1"]
    # total mass non-increasing in b along the kappa row
    assert conc["mass_1"] + conc["mass_2"] >= norm["mass_1"] + norm["mass_2"]
