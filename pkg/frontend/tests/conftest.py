import json

import numpy as np
import pytest


def _write_grid(path, kind, meta, fields):
    names = list(fields)
    shape = fields[names[0]].shape
    with open(path, "w") as fh:
        fh.write("# stepgl-grid v1\n")
        fh.write(f"# kind: {kind}\n")
        fh.write(f"# meta: {json.dumps(meta, sort_keys=True)}\n")
        fh.write(f"# fields: {' '.join(names)}\n")
        fh.write(f"# shape: {shape[0]} {shape[1]}\n")
        for name in names:
            for row in fields[name]:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


@pytest.fixture
def fieldmap_two_spots(tmp_path):
    """Synthetic concentration-regime dump: two bright spots at (+-1, 0)."""
    n = 64
    coords = np.linspace(-1, 1, n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    inside = X**2 + Y**2 <= 1.0
    amp = 0.4 * (np.exp(-((X - 1) ** 2 + Y**2) / 0.02)
                 + np.exp(-((X + 1) ** 2 + Y**2) / 0.02))
    amp[~inside] = 0.0
    phase = 3.0 * X * Y
    path = tmp_path / "fieldmap.grid"
    _write_grid(path, "cartesian-disk",
                {"kappa": 10.0, "H": 18.3, "a": -1.0, "rho": 1.0,
                 "chord_offset": 0.0, "grid": n, "energy": -0.1},
                {"psi_re": amp * np.cos(phase), "psi_im": amp * np.sin(phase),
                 "A1": -Y / 2, "A2": X / 2})
    return path


@pytest.fixture
def fieldmap_normal(tmp_path):
    n = 32
    zero = np.zeros((n + 1, n + 1))
    path = tmp_path / "normal.grid"
    _write_grid(path, "cartesian-disk",
                {"kappa": 10.0, "H": 21.0, "a": -1.0, "rho": 1.0,
                 "chord_offset": 0.0, "grid": n, "energy": 0.0},
                {"psi_re": zero, "psi_im": zero, "A1": zero, "A2": zero})
    return path


@pytest.fixture
def energy_csv(tmp_path):
    """E(b) curve with the zero tail past the threshold 1/mu ~ 1.96."""
    b = np.linspace(1.72, 2.35, 12)
    E = np.where(b < 1.96, -0.3 * (1.96 - b) ** 2, 0.0)
    path = tmp_path / "curve.csv"
    with open(path, "w") as fh:
        fh.write("b,E,converged,iterations,delta\n")
        for bb, ee in zip(b, E):
            fh.write(f"{bb:.17g},{ee:.17g},True,25,{0.3:.17g}\n")
    return path


@pytest.fixture
def decay_csv(tmp_path):
    d = np.linspace(0.2, 1.6, 18)
    scaled = np.sqrt(10 * 18.3) * d
    vals = 0.4 * np.exp(-0.31 * scaled)
    path = tmp_path / "decay.csv"
    with open(path, "w") as fh:
        fh.write("dist,scaled_dist,max_abs_psi\n")
        for a, s, v in zip(d, scaled, vals):
            fh.write(f"{a:.17g},{s:.17g},{v:.17g}\n")
    return path


@pytest.fixture
def phase_csv(tmp_path):
    """Fig.2-style sweep: concentration below the threshold b, normal above."""
    path = tmp_path / "table.csv"
    with open(path, "w") as fh:
        fh.write("kappa,b,regime,T,mass_1,mass_2,E_gst\n")
        for kappa in (10.0, 20.0):
            fh.write(f"{kappa:.17g},1.83,near-all-points,0;1,0.08,0.08,-0.09\n")
            fh.write(f"{kappa:.17g},2.4,normal,,1e-09,1e-09,0\n")
    return path
