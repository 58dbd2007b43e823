"""Batch command-line front end: reproducible runs, records and exports.

Subcommands map one-to-one onto the solver layers (theta0, beta, mu,
eff-energy, gl-solve, verify, phase-diagram).  Every run validates its
parameters against the target solver's preconditions before any compute,
then appends one self-describing JSON-lines record to <out>/records.jsonl.
Records contain no timestamps, so replaying a configuration byte-for-byte
reproduces them; wall-clock timings go to <out>/run.log instead.  A flat
key=value config file supplies defaults that command-line flags override,
and all randomness (multi-start probes) flows from the single --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import effective as eff
from . import gldomain as gl
from . import gridio
from . import halfplane as hp
from . import spectral1d as s1


class UsageError(Exception):
    pass


def _parse_config(path: str) -> dict:
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _merged(args: argparse.Namespace, spec: dict) -> dict:
    """Final parameters: defaults < config file < explicit CLI flags."""
    cfg = _parse_config(args.config) if getattr(args, "config", None) else {}
    params = {}
    for key, (cast, default) in spec.items():
        val = getattr(args, key, None)
        if val is None and key in cfg:
            try:
                val = cast(cfg[key])
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from exc
        if val is None:
            val = default
        params[key] = val
    missing = [k for k, v in params.items() if v is None]
    if missing:
        raise UsageError(f"missing required parameter(s): {', '.join(missing)}")
    return params


def _outdir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("STEPGL_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(outdir: Path, record: dict, t0: float) -> None:
    gridio.append_record(outdir / "records.jsonl", record)
    with open(outdir / "run.log", "a") as fh:
        fh.write(f"{record['command']}: {time.time() - t0:.2f}s\n")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _grid_list(text: str) -> list[float]:
    if ":" in text:
        lo, hi, num = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(num)))
    return [float(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_theta0(args) -> int:
    params = _merged(args, {"tol": (float, 1e-4), "csv": (str, "")})
    _require(params["tol"] > 0, "tol: must be positive")
    t0 = time.time()
    curve = s1.compute_theta0(params["tol"])
    if params["csv"]:
        gridio.write_csv(params["csv"], ["xi", "lambda"],
                         list(zip(curve.xi_values, curve.lambda_values)))
    record = {
        "command": "theta0",
        "parameters": {"tol": params["tol"]},
        "outputs": {"theta0": curve.minimum, "minimizing_xi": curve.minimizing_xi},
        "convergence": {"grid_n": curve.grid.n},
        "warnings": [],
    }
    _emit(_outdir(args), record, t0)
    print(f"theta0 = {curve.minimum:.8f} at xi = {curve.minimizing_xi:.6f}")
    return 0


def cmd_beta(args) -> int:
    params = _merged(args, {"a": (float, None), "tol": (float, 1e-4), "csv": (str, "")})
    _require(-1.0 <= params["a"] < 1.0 and params["a"] != 0.0,
             "a: must lie in [-1,1) and be nonzero")
    _require(params["tol"] > 0, "tol: must be positive")
    t0 = time.time()
    s1.compute_theta0(min(1e-5, params["tol"]))
    curve = s1.compute_beta(params["a"], params["tol"])
    if params["csv"]:
        gridio.write_csv(params["csv"], ["xi", "lambda"],
                         list(zip(curve.xi_values, curve.lambda_values)))
    record = {
        "command": "beta",
        "parameters": {"a": params["a"], "tol": params["tol"]},
        "outputs": {"beta": curve.minimum, "minimizing_xi": curve.minimizing_xi,
                    "floor": hp.essential_floor(params["a"])},
        "convergence": {"grid_n": curve.grid.n},
        "warnings": [],
    }
    _emit(_outdir(args), record, t0)
    print(f"beta({params['a']}) = {curve.minimum:.8f}")
    return 0


def cmd_mu(args) -> int:
    params = _merged(args, {
        "alpha": (float, None), "a": (float, None), "R": (float, 20.0),
        "h": (float, 0.05), "certify": (bool, False), "dump": (str, ""),
        "tol": (float, 1e-4),
    })
    _require(0.0 < params["alpha"] < np.pi, "alpha: must lie in (0, pi)")
    _require(-1.0 <= params["a"] <= 1.0 and params["a"] != 0.0,
             "a: must lie in [-1,1] and be nonzero (a=1 validation only)")
    _require(params["R"] >= 15.0, "R: must be >= 15 (trustworthy truncation)")
    _require(params["h"] <= params["R"] / 100.0, "h: must be <= R/100")
    t0 = time.time()
    s1.compute_theta0(params["tol"])
    wedge = hp.WedgeParams(params["alpha"], params["a"])
    outputs: dict = {}
    warnings: list = []
    if params["certify"]:
        rep = hp.check_bound_state(wedge, params["R"], params["h"])
        outputs.update({k: rep[k] for k in
                        ("mu", "margin", "is_bound", "status", "error_estimate", "floor")})
        convergence = {"richardson": True}
    else:
        res = hp.compute_mu(wedge, params["R"], params["h"])
        outputs.update({"mu": res.eigenvalue, "floor": hp.essential_floor(params["a"]),
                        "margin": hp.essential_floor(params["a"]) - res.eigenvalue})
        convergence = {"residual": res.residual}
        warnings.extend(res.warnings)
        if params["dump"]:
            nr, nt = res.mesh.shape
            u = res.eigenvector.reshape(nr, nt)
            gridio.export_grid(params["dump"], "polar-halfdisk",
                               {"R": res.mesh.R, "h": res.mesh.h,
                                "alpha": params["alpha"], "a": params["a"],
                                "eigenvalue": res.eigenvalue},
                               {"re": u.real, "im": u.imag})
    record = {
        "command": "mu",
        "parameters": {k: params[k] for k in ("alpha", "a", "R", "h", "certify")},
        "outputs": outputs, "convergence": convergence, "warnings": warnings,
    }
    _emit(_outdir(args), record, t0)
    print(json.dumps(outputs, sort_keys=True))
    return 0


def cmd_eff_energy(args) -> int:
    params = _merged(args, {
        "alpha": (float, None), "a": (float, None), "b": (float, 0.0),
        "b_grid": (str, ""), "R": (float, 16.0), "h": (float, 0.08),
        "csv": (str, ""), "tol": (float, 1e-5),
    })
    _require(0.0 < params["alpha"] < np.pi, "alpha: must lie in (0, pi)")
    _require(-1.0 <= params["a"] < 1.0 and params["a"] != 0.0,
             "a: must lie in [-1,1) and be nonzero")
    _require(bool(params["b_grid"]) != (params["b"] > 0.0),
             "exactly one of b, b-grid is required")
    t0 = time.time()
    s1.compute_theta0(params["tol"])
    wedge = hp.WedgeParams(params["alpha"], params["a"])
    mesh = hp.HalfDiskMesh.build(wedge.alpha, params["R"], params["h"])
    warnings: list = []
    if params["b_grid"]:
        grid = _grid_list(params["b_grid"])
        _require(all(v > 0 for v in grid), "b-grid: values must be positive")
        curve = eff.energy_curve(wedge, grid, mesh)
        if params["csv"]:
            rows = [{"b": float(bb), "E": float(ee), "converged": bool(cc),
                     "iterations": int(ii), "delta": float(dd)}
                    for bb, ee, cc, ii, dd in zip(curve.b_values, curve.E_values,
                                                  curve.converged, curve.iterations,
                                                  curve.deltas)]
            gridio.write_csv(params["csv"], ["b", "E", "converged", "iterations", "delta"],
                             rows)
        outputs = {"threshold_estimate": curve.threshold_estimate,
                   "E_min": float(curve.E_values.min())}
        convergence = {"all_converged": bool(curve.converged.all())}
        if curve.flagged:
            warnings.append("curve flagged: at least one b point did not converge")
    else:
        prob = eff.EffectiveProblem(params["b"], wedge, mesh)
        opts = eff.MinimizeOptions(seed=args.seed) if getattr(args, "seed", None) \
            is not None else None
        res = eff.minimize_J(prob, opts)
        outputs = {"E": res.energy, "grad_norm": res.grad_norm,
                   "sup_u": float(np.abs(res.state).max()),
                   "mu": prob.ground_pair[0]}
        convergence = {"converged": res.converged, "iterations": res.iterations}
        warnings.extend(prob.warnings)
    record = {
        "command": "eff-energy",
        "parameters": {k: params[k] for k in ("alpha", "a", "b", "b_grid", "R", "h")},
        "outputs": outputs, "convergence": convergence, "warnings": warnings,
    }
    _emit(_outdir(args), record, t0)
    print(json.dumps(outputs, sort_keys=True))
    return 0


def _geometry_params(params) -> gl.StepFieldGeometry:
    return gl.build_geometry(params["rho"], params["offset"], params["a"])


def cmd_gl_solve(args) -> int:
    params = _merged(args, {
        "kappa": (float, None), "b": (float, None), "rho": (float, 1.0),
        "offset": (float, 0.0), "a": (float, -1.0), "grid": (int, 128),
        "dump": (str, ""), "decay_csv": (str, ""), "tol": (float, 1e-5),
    })
    _require(params["kappa"] > 0, "kappa: must be positive")
    _require(params["b"] > 0, "b: must be positive")
    _require(abs(params["offset"]) < params["rho"], "offset: chord must cut the disk")
    _require(params["grid"] >= 16 and params["grid"] % 2 == 0,
             "grid: must be an even integer >= 16")
    t0 = time.time()
    s1.compute_theta0(params["tol"])
    geometry = _geometry_params(params)
    mesh = gl.DiskMesh(geometry, params["grid"])
    state = gl.minimize_GL(geometry, params["kappa"], params["b"], mesh)
    residuals = gl.gl_residual(state, geometry, mesh)
    apriori = gl.apriori_check(state)
    if params["dump"]:
        n = mesh.n
        psi_full = np.zeros((n + 1, n + 1), dtype=complex)
        psi_full[mesh.inside] = state.psi
        gridio.export_grid(params["dump"], "cartesian-disk",
                           {"kappa": params["kappa"], "H": state.H, "a": params["a"],
                            "rho": params["rho"], "chord_offset": mesh.chord_y,
                            "grid": n, "energy": state.energy},
                           {"psi_re": psi_full.real, "psi_im": psi_full.imag,
                            "A1": state.A[0], "A2": state.A[1]})
    if params["decay_csv"]:
        ell = min(4.8 * params["kappa"] ** -0.85, 0.95 * geometry.half_distance)
        shells = diag.decay_shells(state, geometry, mesh, ell=0.5 * ell)
        gridio.write_csv(params["decay_csv"],
                         ["dist", "scaled_dist", "max_abs_psi"], shells)
    record = {
        "command": "gl-solve",
        "parameters": {k: params[k] for k in
                       ("kappa", "b", "rho", "offset", "a", "grid")},
        "outputs": {"energy": state.energy,
                    "breakdown": {k: state.breakdown[k] for k in
                                  ("kinetic", "quadratic", "quartic", "field")},
                    "sup_psi": apriori["sup_psi"],
                    "residuals": residuals,
                    "apriori": {k: apriori[k] for k in ("ratio_kinetic", "ratio_field")}},
        "convergence": {"converged": state.converged, "sweeps": len(state.trace)},
        "warnings": state.warnings,
    }
    _emit(_outdir(args), record, t0)
    print(json.dumps(record["outputs"], sort_keys=True))
    return 0 if state.converged else 1


def cmd_phase_diagram(args) -> int:
    params = _merged(args, {
        "kappa_grid": (str, None), "b_grid": (str, None), "rho": (float, 1.0),
        "offset": (float, 0.0), "a": (float, -1.0), "grid": (int, 128),
        "csv": (str, ""), "tol": (float, 1e-5),
    })
    kappas = _grid_list(params["kappa_grid"])
    bs = _grid_list(params["b_grid"])
    _require(all(k > 0 for k in kappas), "kappa-grid: values must be positive")
    _require(all(v > 0 for v in bs), "b-grid: values must be positive")
    t0 = time.time()
    s1.compute_theta0(params["tol"])
    geometry = _geometry_params(params)
    rows = diag.phase_diagram(geometry, kappas, bs, grid_n=params["grid"])
    n_points = len(geometry.points)
    columns = ["kappa", "b", "regime", "T"] \
        + [f"mass_{j + 1}" for j in range(n_points)] + ["E_gst"]
    table = []
    failed = 0
    for row in rows:
        failed += row["regime"] == "failed"
        table.append({
            "kappa": row["kappa"], "b": row["b"], "regime": row["regime"],
            "T": ";".join(str(j) for j in row.get("T", [])),
            **{f"mass_{j + 1}": row.get(f"mass_{j + 1}", float("nan"))
               for j in range(n_points)},
            "E_gst": row.get("E_gst", float("nan")),
        })
    if params["csv"]:
        gridio.write_csv(params["csv"], columns, table)
    record = {
        "command": "phase-diagram",
        "parameters": {k: params[k] for k in
                       ("kappa_grid", "b_grid", "rho", "offset", "a", "grid")},
        "outputs": {"rows": table},
        "convergence": {"cells": len(table), "failed": failed},
        "warnings": [],
    }
    _emit(_outdir(args), record, t0)
    print(f"phase diagram: {len(table)} cells, {failed} failed")
    return 0 if failed == 0 else 1


def cmd_verify(args) -> int:
    params = _merged(args, {
        "preset": (str, "disk-diameter"), "kappa": (float, 10.0),
        "grid": (int, 128), "eff_R": (float, 16.0), "eff_h": (float, 0.08),
    })
    _require(params["preset"] == "disk-diameter",
             f"preset: unknown preset {params['preset']!r}")
    t0 = time.time()
    checks: list[tuple[str, bool, str]] = []

    def check(name, ok, detail):
        checks.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    theta = s1.compute_theta0(1e-5).minimum
    check("theta0", abs(theta - 0.59) <= 0.005, f"theta0 = {theta:.6f}")

    geometry = gl.build_geometry(1.0, 0.0, -1.0)
    wedge = hp.WedgeParams(float(geometry.alphas[0]), geometry.a)
    cert = hp.check_bound_state(wedge, R=16.0, h=0.1)
    check("bound-state", cert["is_bound"],
          f"mu = {cert['mu']:.6f}, margin = {cert['margin']:.4f} "
          f"(err ~ {cert['error_estimate']:.1e})")
    mu = cert["mu"]

    hp_mesh = hp.HalfDiskMesh.build(wedge.alpha, params["eff_R"], params["eff_h"])
    b_lo, b_hi = 1.0 / theta, 1.0 / mu
    grid_b = list(np.linspace(1.02 * b_lo, 1.1 * b_hi, 8))
    curve = eff.energy_curve(wedge, grid_b, hp_mesh)
    thr_ok = abs(curve.threshold_estimate - b_hi) <= 0.02 * b_hi
    check("effective-threshold", thr_ok,
          f"threshold = {curve.threshold_estimate:.4f} vs 1/mu = {b_hi:.4f}")
    inside = (curve.b_values > b_lo) & (curve.b_values < b_hi)
    check("effective-sign", bool(np.all(curve.E_values[inside] < -1e-4)),
          f"min E inside window = {curve.E_values[inside].min():.6f}")

    b_mid = 0.5 * (b_lo + b_hi)
    seeds = gl.prepare_seeds(geometry, b_mid, params["eff_R"], params["eff_h"])
    mesh = gl.DiskMesh(geometry, params["grid"])
    state = gl.minimize_GL(geometry, params["kappa"], b_mid, mesh,
                           gl.GLOptions(seeds=seeds))
    ell = min(4.8 * params["kappa"] ** -0.85, 0.95 * geometry.half_distance)
    rep = diag.concentration_report(
        state, geometry, mesh, ell,
        [{"E": s["eff"].energy, "mu": s["mu"]} for s in seeds])
    check("gl-converged", state.converged, f"E_gst = {state.energy:.6f}")
    check("concentration", rep.total["l4_fraction_inside"] >= 0.9,
          f"L4 fraction inside neighborhoods = {rep.total['l4_fraction_inside']:.3f}")
    field_frac = state.breakdown["field"] / max(abs(state.energy), 1e-30)
    check("field-term", field_frac < 0.01, f"field fraction = {field_frac:.2e}")
    check("sup-bound", float(np.abs(state.psi).max()) <= 1.001,
          f"sup|psi| = {float(np.abs(state.psi).max()):.4f}")

    passed = all(ok for _, ok, _ in checks)
    record = {
        "command": "verify",
        "parameters": params,
        "outputs": {"checks": [{"name": n, "pass": ok, "detail": d}
                               for n, ok, d in checks],
                    "better_normalization": rep.better_normalization},
        "convergence": {"all_passed": passed},
        "warnings": [],
    }
    _emit(_outdir(args), record, t0)
    print(f"verify: {'PASS' if passed else 'FAIL'} "
          f"({sum(ok for _, ok, _ in checks)}/{len(checks)})")
    return 0 if passed else 1


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default $STEPGL_OUT or .)")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int, help="seed for all randomized probes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepgl",
        description="Spectral thresholds and GL minimizers for step magnetic fields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theta0", help="de Gennes constant")
    p.add_argument("--tol", type=float)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_theta0)

    p = sub.add_parser("beta", help="whole-plane step threshold beta_a")
    p.add_argument("--a", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("mu", help="half-plane wedge spectral value mu(alpha, a)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--certify", action="store_const", const=True)
    p.add_argument("--dump")
    p.set_defaults(func=cmd_mu)

    p = sub.add_parser("eff-energy", help="effective half-plane energy E(b)")
    for name, typ in (("alpha", float), ("a", float), ("b", float),
                      ("R", float), ("h", float), ("tol", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--b-grid", dest="b_grid")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eff_energy)

    p = sub.add_parser("gl-solve", help="bounded-domain GL minimization")
    for name, typ in (("kappa", float), ("b", float), ("rho", float),
                      ("offset", float), ("a", float), ("grid", int), ("tol", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--dump")
    p.add_argument("--decay-csv", dest="decay_csv")
    p.set_defaults(func=cmd_gl_solve)

    p = sub.add_parser("phase-diagram", help="(kappa, b) sweep table")
    p.add_argument("--kappa-grid", dest="kappa_grid")
    p.add_argument("--b-grid", dest="b_grid")
    for name, typ in (("rho", float), ("offset", float), ("a", float),
                      ("grid", int), ("tol", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("verify", help="end-to-end pipeline with pass/fail summary")
    p.add_argument("--preset")
    p.add_argument("--kappa", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--eff-R", dest="eff_R", type=float)
    p.add_argument("--eff-h", dest="eff_h", type=float)
    p.set_defaults(func=cmd_verify)

    for p_sub in sub.choices.values():
        _add_common(p_sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (s1.EigensolveError, s1.RefinementError, hp.EigensolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
