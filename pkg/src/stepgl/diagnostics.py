"""Measurement layer for GL minimizers: concentration, decay, critical fields.

Everything here is read-only analysis of converged states.  The
concentration report always carries both candidate normalizations of the
local mass law (kappa^2 int |psi|^4 ~ -2E and ~ -2E/b): the two differ by
the factor the effective-energy rescaling produces, the measurements
decide which one the data matches, and callers key on the better one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gldomain as gl
from . import halfplane as hp

__all__ = [
    "Neighborhood",
    "CriticalFieldReport",
    "ConcentrationReport",
    "local_energy",
    "concentration_report",
    "decay_profile",
    "critical_fields",
    "phase_diagram",
]


@dataclass
class Neighborhood:
    """Nodes within distance ell of an edge-boundary intersection point."""

    center: np.ndarray
    ell: float
    mask: np.ndarray = field(repr=False, default=None)

    @classmethod
    def around(cls, mesh: gl.DiskMesh, center, ell: float) -> "Neighborhood":
        center = np.asarray(center, dtype=float)
        return cls(center=center, ell=ell, mask=mesh.neighborhood_mask(center, ell))


def _link_arrays(mesh: gl.DiskMesh):
    p = np.concatenate([mesh.xp, mesh.yp])
    q = np.concatenate([mesh.xq, mesh.yq])
    return p, q


def local_energy(state: gl.GLState, geometry: gl.StepFieldGeometry,
                 mesh: gl.DiskMesh, region: np.ndarray) -> dict:
    """Restricted energy E0 over a node region, and E = E0 + global field term.

    A link belongs to the region of its first endpoint, which makes E0
    exactly additive over disjoint node regions and exactly total on the
    full domain.  The field term is always integrated globally.
    """
    region = np.asarray(region, dtype=bool)
    if region.shape != (mesh.n_nodes,):
        raise ValueError("region mask must be over node DOFs")
    h2 = mesh.h**2
    kappa, H = state.kappa, state.H
    circ = state.circ if state.circ is not None else gl._link_circ_from_nodes(mesh, *state.A)
    p, q = _link_arrays(mesh)
    diff = state.psi[q] * np.exp(-1j * kappa * H * circ) - state.psi[p]
    kinetic = float(np.sum(np.abs(diff[region[p]]) ** 2))
    abs2 = np.abs(state.psi[region]) ** 2
    e0 = kinetic - kappa**2 * h2 * float(abs2.sum()) \
        + 0.5 * kappa**2 * h2 * float((abs2**2).sum())
    resid = mesh.cell_curl(circ) - mesh.b0_cells
    fieldterm = (kappa * H) ** 2 * h2 * float((resid**2).sum())
    return {"E0": e0, "E": e0 + fieldterm}


@dataclass
class ConcentrationReport:
    ell: float
    per_point: list
    total: dict
    active_set: list
    better_normalization: str


def concentration_report(state: gl.GLState, geometry: gl.StepFieldGeometry,
                         mesh: gl.DiskMesh, ell: float,
                         eff_energies: list[dict]) -> ConcentrationReport:
    """Local L4 masses against the effective energies, both normalizations.

    eff_energies: one record per intersection point with keys "E" (the
    effective energy at this b) and "mu" (the wedge spectral value).
    Neighborhoods must stay disjoint: ell may not exceed half the
    inter-point distance.
    """
    if ell <= 0:
        raise ValueError("ell must be positive")
    if ell > geometry.half_distance:
        raise ValueError(
            f"ell={ell} exceeds half the inter-point distance "
            f"{geometry.half_distance}: neighborhoods must be disjoint")
    b = state.b
    h2 = mesh.h**2
    kappa = state.kappa
    psi4 = np.abs(state.psi) ** 4
    per = []
    active = [j for j, rec in enumerate(eff_energies) if rec["mu"] * b < 1.0]
    for j, (point, rec) in enumerate(zip(geometry.points, eff_energies)):
        mask = mesh.neighborhood_mask(point, ell)
        l4 = kappa**2 * h2 * float(psi4[mask].sum())
        per.append({
            "point": j,
            "l4_mass": l4,
            "E_eff": rec["E"],
            "mismatch_with_2E": abs(l4 + 2.0 * rec["E"]),
            "mismatch_with_2E_over_b": abs(l4 + 2.0 * rec["E"] / b),
        })
    sum_e = sum(eff_energies[j]["E"] for j in active)
    total = {
        "E_gst": state.energy,
        "sum_E": sum_e,
        "sum_E_over_b": sum_e / b,
        "mismatch_with_sum": abs(state.energy - sum_e),
        "mismatch_with_sum_over_b": abs(state.energy - sum_e / b),
        "l4_fraction_inside": float(
            psi4[np.any([mesh.neighborhood_mask(pt, ell) for pt in geometry.points],
                        axis=0)].sum() / psi4.sum()) if psi4.sum() > 0 else 0.0,
    }
    better = "2E" if total["mismatch_with_sum"] <= total["mismatch_with_sum_over_b"] \
        else "2E_over_b"
    return ConcentrationReport(ell=ell, per_point=per, total=total,
                               active_set=active, better_normalization=better)


def decay_profile(state: gl.GLState, geometry: gl.StepFieldGeometry,
                  mesh: gl.DiskMesh, points: np.ndarray | None = None,
                  ell: float = 0.2, shells: int = 20,
                  fit_window_scaled: tuple | None = None) -> dict:
    """Exponential decay of the order parameter away from the active points.

    weighted_mass integrates |psi|^2 + (kappa H)^{-1} |(grad - i kappa H A)psi|^2
    over {dist(x, S) >= ell}; fitted_rate is the slope of log(shell max of
    |psi|) against sqrt(kappa H) * dist.  With fit_window_scaled=(s_lo, s_hi)
    the shells cover that window of the scaled distance, so rates fitted at
    different kappa probe the same magnetic-length regime and can be
    compared directly.  States with sup|psi| below 1e-6 are reported
    untestable.
    """
    S = geometry.points if points is None else np.atleast_2d(points)
    kappa, H = state.kappa, state.H
    h2 = mesh.h**2
    dist = np.min([np.sqrt((mesh.x - p[0]) ** 2 + (mesh.y - p[1]) ** 2) for p in S], axis=0)

    circ = state.circ if state.circ is not None else gl._link_circ_from_nodes(mesh, *state.A)
    p, q = _link_arrays(mesh)
    diff2 = np.abs(state.psi[q] * np.exp(-1j * kappa * H * circ) - state.psi[p]) ** 2
    kin_node = np.zeros(mesh.n_nodes)
    np.add.at(kin_node, p, 0.5 * diff2)
    np.add.at(kin_node, q, 0.5 * diff2)
    far = dist >= ell
    weighted = float(np.sum(h2 * np.abs(state.psi[far]) ** 2
                            + kin_node[far] / (kappa * H)))

    sup = float(np.abs(state.psi).max())
    if sup < 1e-6:
        return {"weighted_mass": weighted, "fitted_rate": None,
                "status": "state uniformly small; no decay to fit"}
    d_max = float(dist.max())
    if fit_window_scaled is not None:
        scale = np.sqrt(kappa * H)
        lo = fit_window_scaled[0] / scale
        hi = min(fit_window_scaled[1] / scale, 0.95 * d_max)
        edges = np.linspace(lo, hi, shells + 1)
    else:
        edges = np.linspace(ell, 0.9 * d_max, shells + 1)
    r_mid, log_max = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (dist >= lo) & (dist < hi)
        if not sel.any():
            continue
        m = float(np.abs(state.psi[sel]).max())
        if m > 1e-13:
            r_mid.append(0.5 * (lo + hi))
            log_max.append(np.log(m))
    if len(r_mid) < 5:
        return {"weighted_mass": weighted, "fitted_rate": None,
                "status": "too few shells with signal"}
    x = np.sqrt(kappa * H) * np.asarray(r_mid)
    y = np.asarray(log_max)
    slope, _ = np.polyfit(x, y, 1)
    return {"weighted_mass": weighted, "fitted_rate": -float(slope), "status": "ok"}


def decay_shells(state: gl.GLState, geometry: gl.StepFieldGeometry,
                 mesh: gl.DiskMesh, ell: float = 0.1, shells: int = 20) -> list[dict]:
    """Shell table of |psi| maxima vs distance to the intersection points.

    Rows carry the raw and sqrt(kappa H)-scaled distances, ready for the
    plotting component's decay figures.
    """
    dist = np.min([np.sqrt((mesh.x - p[0]) ** 2 + (mesh.y - p[1]) ** 2)
                   for p in geometry.points], axis=0)
    scale = np.sqrt(state.kappa * state.H)
    edges = np.linspace(ell, 0.9 * float(dist.max()), shells + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (dist >= lo) & (dist < hi)
        if not sel.any():
            continue
        mid = 0.5 * (lo + hi)
        rows.append({"dist": mid, "scaled_dist": scale * mid,
                     "max_abs_psi": float(np.abs(state.psi[sel]).max())})
    return rows


@dataclass
class CriticalFieldReport:
    """Critical-field ladder H_C2 < H_int < H_1 <= ... for one geometry."""

    kappa: float
    H_C2: float
    H_int: float
    H_j: list
    mu_sorted: list
    excluded: list
    T: list | None = None
    b: float | None = None

    def active_set(self, b: float) -> list:
        return [j for j, mu in enumerate(self.mu_sorted) if mu < 1.0 / b]


def critical_fields(geometry: gl.StepFieldGeometry, kappa: float,
                    mu_values, b: float | None = None) -> CriticalFieldReport:
    """Ladder of loss-of-superconductivity fields from the wedge spectra.

    mu_values are the per-point wedge spectral values (bound-state
    certified).  Points whose mu reaches the essential floor |a|*Theta0
    violate the bound-state condition and are excluded from the ladder
    with a marker.  Labelling follows decreasing mu, so H_1 <= H_2 <= ...
    """
    a = geometry.a
    floor = hp.essential_floor(a)
    mus = list(np.atleast_1d(np.asarray(mu_values, dtype=float)))
    excluded = [j for j, mu in enumerate(mus) if mu >= floor]
    kept = sorted((mu for j, mu in enumerate(mus) if j not in excluded), reverse=True)
    report = CriticalFieldReport(
        kappa=kappa,
        H_C2=kappa / abs(a),
        H_int=kappa / floor,
        H_j=[kappa / mu for mu in kept],
        mu_sorted=kept,
        excluded=[(j, "bound-state condition violated: mu >= |a|*Theta0")
                  for j in excluded],
        b=b,
    )
    if not report.H_C2 < report.H_int:
        raise AssertionError("field ordering broken: H_C2 >= H_int")
    if report.H_j and not report.H_int < report.H_j[0]:
        raise AssertionError("field ordering broken: H_int >= H_1")
    if any(h1 > h2 + 1e-12 for h1, h2 in zip(report.H_j, report.H_j[1:])):
        raise AssertionError("field ordering broken among H_j")
    if b is not None:
        report.T = report.active_set(b)
    return report


def phase_diagram(geometry: gl.StepFieldGeometry, kappa_grid, b_grid,
                  grid_n: int = 128, ell_scale: float = 4.8,
                  ell_exponent: float = 0.85,
                  opts: gl.GLOptions | None = None) -> list[dict]:
    """GL solves over a (kappa, b) grid, labelled by concentration regime.

    Each row carries the active set, the per-neighborhood L4 masses at
    ell = ell_scale * kappa^{-ell_exponent}, the ground-state energy and a
    regime label in {near-all-points, partial, normal}.  Failures are
    recorded per cell; the table is still emitted.
    """
    rows = []
    seeds_cache: dict = {}
    for b in np.atleast_1d(b_grid):
        b = float(b)
        if b not in seeds_cache:
            seeds_cache[b] = gl.prepare_seeds(geometry, b)
        seeds = seeds_cache[b]
        for kappa in np.atleast_1d(kappa_grid):
            kappa = float(kappa)
            row = {"kappa": kappa, "b": b}
            try:
                mesh = gl.DiskMesh(geometry, grid_n)
                o = opts if opts is not None else gl.GLOptions()
                o.seeds = seeds
                state = gl.minimize_GL(geometry, kappa, b, mesh, o)
                ell = min(ell_scale * kappa**-ell_exponent,
                          0.95 * geometry.half_distance)
                h2 = mesh.h**2
                psi4 = np.abs(state.psi) ** 4
                masses = [kappa**2 * h2 * float(psi4[mesh.neighborhood_mask(pt, ell)].sum())
                          for pt in geometry.points]
                T = [j for j, s in enumerate(seeds) if s["mu"] * b < 1.0]
                sup = float(np.abs(state.psi).max())
                if sup <= 5e-2:
                    regime = "normal"
                elif len(T) == len(seeds):
                    regime = "near-all-points"
                else:
                    regime = "partial"
                row.update({"regime": regime, "T": T, "ell": ell,
                            "E_gst": state.energy, "sup_psi": sup,
                            "converged": state.converged})
                row.update({f"mass_{j + 1}": m for j, m in enumerate(masses)})
            except Exception as exc:   # failures recorded, table still emitted
                row.update({"regime": "failed", "error": str(exc)})
            rows.append(row)
    return rows
