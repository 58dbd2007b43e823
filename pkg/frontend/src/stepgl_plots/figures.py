"""Figure rendering for stepgl outputs.

Each figure kind has a `prepare_*` step that reduces the input files to
plain arrays (unit-testable without touching matplotlib) and a drawing
step; `render` wires them together.  Rendering is deterministic: fixed
style, fixed dpi, pinned PNG metadata, no timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import EmptyInputError, SchemaError, read_csv, read_grid

__all__ = ["FigureSpec", "render", "count_bright_regions",
           "prepare_fieldmap", "prepare_energy_curve", "prepare_decay",
           "prepare_phase_diagram"]

KINDS = ("fieldmap", "energy-curve", "decay", "phase-diagram")
_SAVE = {"dpi": 130, "metadata": {"Software": "stepgl-plots"}}


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def count_bright_regions(image: np.ndarray, rel_threshold: float = 0.5) -> int:
    """Connected bright components (4-neighbour) above rel_threshold * max."""
    peak = float(np.nanmax(image))
    if peak <= 0:
        return 0
    mask = image >= rel_threshold * peak
    seen = np.zeros_like(mask, dtype=bool)
    count = 0
    for i, j in zip(*np.nonzero(mask)):
        if seen[i, j]:
            continue
        count += 1
        stack = [(i, j)]
        seen[i, j] = True
        while stack:
            a, b = stack.pop()
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                x, y = a + da, b + db
                if 0 <= x < mask.shape[0] and 0 <= y < mask.shape[1] \
                        and mask[x, y] and not seen[x, y]:
                    seen[x, y] = True
                    stack.append((x, y))
    return count


# ---------------------------------------------------------------------------
# prepare steps
# ---------------------------------------------------------------------------

def prepare_fieldmap(spec: FigureSpec) -> dict:
    kind, meta, fields = read_grid(spec.inputs[0])
    if kind != "cartesian-disk":
        raise SchemaError(f"{spec.inputs[0]}: fieldmap needs a cartesian-disk dump, got {kind!r}")
    for name in ("psi_re", "psi_im"):
        if name not in fields:
            raise SchemaError(f"{spec.inputs[0]}: missing field {name!r}")
    abs_psi = np.hypot(fields["psi_re"], fields["psi_im"])
    rho = float(meta.get("rho", 1.0))
    out = {
        "abs_psi": abs_psi,
        "rho": rho,
        "chord_offset": float(meta.get("chord_offset", 0.0)),
        "kappa": meta.get("kappa"),
        "H": meta.get("H"),
        "a": meta.get("a"),
        "bright_regions": count_bright_regions(abs_psi),
    }
    half = np.sqrt(max(rho**2 - out["chord_offset"] ** 2, 0.0))
    out["points"] = [(half, out["chord_offset"]), (-half, out["chord_offset"])]
    return out


def prepare_energy_curve(spec: FigureSpec) -> dict:
    table = read_csv(spec.inputs[0], required=["b", "E"])
    order = np.argsort(table["b"])
    return {"b": table["b"][order], "E": table["E"][order],
            "threshold": spec.style.get("threshold")}


def prepare_decay(spec: FigureSpec) -> dict:
    table = read_csv(spec.inputs[0], required=["scaled_dist", "max_abs_psi"])
    sel = table["max_abs_psi"] > 0
    if sel.sum() < 3:
        raise EmptyInputError(f"{spec.inputs[0]}: too few nonzero shells for a decay plot")
    x = table["scaled_dist"][sel]
    y = np.log(table["max_abs_psi"][sel])
    slope, intercept = np.polyfit(x, y, 1)
    return {"scaled_dist": x, "log_max": y,
            "rate": -float(slope), "intercept": float(intercept)}


def prepare_phase_diagram(spec: FigureSpec) -> dict:
    table = read_csv(spec.inputs[0], required=["kappa", "b", "regime"])
    kappas = np.unique(table["kappa"])
    bs = np.unique(table["b"])
    regime = np.full((bs.size, kappas.size), "missing", dtype=object)
    masses = np.full((bs.size, kappas.size), np.nan)
    mass_cols = [c for c in table if c.startswith("mass_")]
    for row in range(table["kappa"].size):
        i = int(np.searchsorted(bs, table["b"][row]))
        j = int(np.searchsorted(kappas, table["kappa"][row]))
        regime[i, j] = str(table["regime"][row])
        if mass_cols:
            masses[i, j] = sum(float(table[c][row]) for c in mass_cols)
    return {"kappa": kappas, "b": bs, "regime": regime, "mass": masses}


# ---------------------------------------------------------------------------
# drawing
# ---------------------------------------------------------------------------

def _draw_fieldmap(data: dict, spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 5.4))
    rho = data["rho"]
    im = ax.imshow(data["abs_psi"].T, origin="lower", cmap=spec.style.get("cmap", "inferno"),
                   extent=(-rho, rho, -rho, rho), interpolation="nearest")
    fig.colorbar(im, ax=ax, label="|psi|")
    ax.add_patch(plt.Circle((0, 0), rho, fill=False, color="w", lw=0.8))
    ax.plot([data["points"][1][0], data["points"][0][0]],
            [data["points"][1][1], data["points"][0][1]],
            color="cyan", lw=1.0, label="magnetic edge")
    ell = spec.style.get("ell")
    if ell:
        for p in data["points"]:
            ax.add_patch(plt.Circle(p, ell, fill=False, color="lime", lw=1.0, ls="--"))
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    title = f"|psi|  kappa={data['kappa']}, H={data['H']}, a={data['a']}"
    ax.set_title(title, fontsize=10)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def _draw_energy_curve(data: dict, spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(data["b"], data["E"], "o-", color="tab:blue", ms=4, label="E(b)")
    ax.axhline(0.0, color="0.6", lw=0.8)
    if data["threshold"] is not None:
        ax.axvline(data["threshold"], color="tab:red", ls="--", lw=1.0,
                   label="1/mu threshold")
    ax.set_xlabel("b = H/kappa")
    ax.set_ylabel("effective energy E(b)")
    ax.legend(fontsize=8)
    return fig


def _draw_decay(data: dict, spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(data["scaled_dist"], data["log_max"], "o", ms=4, color="tab:blue",
            label="shell maxima")
    x = data["scaled_dist"]
    ax.plot(x, -data["rate"] * x + data["intercept"], "-", color="tab:red",
            label=f"fit rate {data['rate']:.3f}")
    ax.set_xlabel("sqrt(kappa H) * dist to intersection points")
    ax.set_ylabel("log max |psi|")
    ax.legend(fontsize=8)
    return fig


_REGIME_GREY = {"near-all-points": 0.55, "partial": 0.8, "normal": 1.0,
                "failed": 1.0, "missing": 1.0}


def _draw_phase_diagram(data: dict, spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    kappas, bs = data["kappa"], data["b"]
    shade = np.array([[_REGIME_GREY.get(r, 1.0) for r in row] for row in data["regime"]])
    ax.pcolormesh(np.arange(kappas.size + 1), np.arange(bs.size + 1), shade,
                  cmap="gray", vmin=0.0, vmax=1.0, edgecolors="0.3", lw=0.5)
    ax.set_xticks(np.arange(kappas.size) + 0.5, [f"{k:g}" for k in kappas])
    ax.set_yticks(np.arange(bs.size) + 0.5, [f"{b:g}" for b in bs])
    ax.set_xlabel("kappa")
    ax.set_ylabel("b = H/kappa")
    ax.set_title("grey regions carry superconductivity near the edge-boundary points",
                 fontsize=9)
    return fig


def render(spec: FigureSpec) -> str:
    """Render the figure described by the spec and write the image file."""
    prepare, draw = {
        "fieldmap": (prepare_fieldmap, _draw_fieldmap),
        "energy-curve": (prepare_energy_curve, _draw_energy_curve),
        "decay": (prepare_decay, _draw_decay),
        "phase-diagram": (prepare_phase_diagram, _draw_phase_diagram),
    }[spec.kind]
    data = prepare(spec)
    fig = draw(data, spec)
    fig.savefig(spec.output, **_SAVE)
    plt.close(fig)
    return spec.output
