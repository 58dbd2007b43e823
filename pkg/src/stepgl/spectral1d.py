"""Fibered 1D eigenvalue problems for the spectral thresholds.

Two families of half-line / whole-line Schrodinger operators are solved here:

* the de Gennes fiber  -d^2/dt^2 + (t - xi)^2  on (0, inf) with a Neumann
  condition at t = 0, whose band minimum over xi is the de Gennes constant
  Theta0 ~ 0.59;
* the step fiber  -d^2/dt^2 + (Atilde(t) - xi)^2  on the whole line, with
  the piecewise-linear primitive Atilde(t) = t for t > 0 and a*t for t < 0,
  whose band minimum is the whole-plane step threshold beta_a.

Both are discretized with second-order centered finite differences on a
uniform node grid (Neumann via ghost-node reflection, Dirichlet at the
artificial far ends) and solved by shifted inverse power iteration with a
direct tridiagonal solve.  A LAPACK tridiagonal eigensolver is kept as an
independent oracle route.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Grid1D",
    "FiberEigenvalueCurve",
    "EigensolveError",
    "RefinementError",
    "degennes_fiber_eigenvalue",
    "degennes_fiber_eigenvalue_dense",
    "step_fiber_eigenvalue",
    "step_fiber_eigenvalue_dense",
    "compute_theta0",
    "compute_beta",
    "theta0_value",
    "clear_theta0_cache",
]

DEFAULT_T_MAX = 20.0
DEFAULT_N = 4001


class EigensolveError(RuntimeError):
    """Inverse iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class RefinementError(RuntimeError):
    """Grid-refinement budget exhausted; carries the last two iterates."""

    def __init__(self, message: str, last_two: tuple[float, float]):
        super().__init__(f"{message} (last iterates {last_two[0]!r}, {last_two[1]!r})")
        self.last_two = last_two


@dataclass(frozen=True)
class Grid1D:
    """Uniform node grid on [t_min, t_max] with n nodes (ends included)."""

    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"Grid1D needs n >= 3, got {self.n}")
        if not self.t_max > self.t_min:
            raise ValueError("Grid1D needs t_max > t_min")

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)

    def refined(self) -> "Grid1D":
        """Grid with halved spacing (same endpoints)."""
        return Grid1D(self.t_min, self.t_max, 2 * self.n - 1)


@dataclass
class FiberEigenvalueCurve:
    """Sampled lowest-eigenvalue band lambda(xi) and its refined minimum."""

    xi_values: np.ndarray
    lambda_values: np.ndarray
    minimizing_xi: float
    minimum: float
    grid: Grid1D = field(repr=False, default=None)

    def __post_init__(self):
        if np.any(np.asarray(self.lambda_values) < 0):
            raise ValueError("fiber eigenvalues must be nonnegative")


# ---------------------------------------------------------------------------
# discrete fiber operators (symmetric tridiagonal (d, e) pairs)
# ---------------------------------------------------------------------------

def _degennes_tridiag(xi: float, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal for -d^2/dt^2 + (t-xi)^2 on [0, t_max].

    Neumann at t=0 by ghost reflection u(-h) = u(h); the resulting
    nonsymmetric first row is symmetrized by the similarity
    diag(1/sqrt(2), 1, ...), which leaves the spectrum unchanged.
    Dirichlet at t_max drops the last node.
    """
    if abs(grid.t_min) > 0:
        raise ValueError("de Gennes fiber grid must start at t=0")
    if grid.t_max < xi + 10.0:
        raise ValueError(f"grid too short: need t_max >= xi + 10, got {grid.t_max} < {xi + 10.0}")
    h = grid.h
    t = grid.nodes()[:-1]  # Dirichlet at t_max
    d = 2.0 / h**2 + (t - xi) ** 2
    e = np.full(t.size - 1, -1.0 / h**2)
    e[0] = -np.sqrt(2.0) / h**2
    return d, e


def _step_primitive(t: np.ndarray, a: float) -> np.ndarray:
    """Piecewise-linear primitive of the step field: t on t>0, a*t on t<0."""
    return np.where(t > 0, t, a * t)


def _step_tridiag(a: float, xi: float, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal for -d^2/dt^2 + (Atilde(t)-xi)^2 on [-t_max, t_max].

    Dirichlet at both artificial ends (interior nodes only).
    """
    if abs(grid.t_min + grid.t_max) > 1e-12 * grid.t_max:
        raise ValueError("step fiber grid must be symmetric: t_min = -t_max")
    h = grid.h
    t = grid.nodes()[1:-1]
    d = 2.0 / h**2 + (_step_primitive(t, a) - xi) ** 2
    e = np.full(t.size - 1, -1.0 / h**2)
    return d, e


def _lowest_eig_inverse_iteration(d: np.ndarray, e: np.ndarray,
                                  tol: float = 1e-10, max_iter: int = 200) -> float:
    """Smallest eigenvalue of a symmetric tridiagonal matrix.

    Shifted inverse power iteration with a direct banded solve.  The shift
    starts at 0 (the operator is positive definite) and is updated to
    theta - residual, which stays at or below the target eigenvalue, so the
    iteration cannot lock onto a higher state.
    """
    n = d.size
    ab = np.zeros((3, n))
    v = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    theta = float(v @ (d * v) + 2.0 * (e * v[:-1] * v[1:]).sum())
    # residuals cannot drop below the roundoff floor set by the matrix norm
    floor = 100.0 * np.finfo(float).eps * (np.abs(d).max() + 2.0 * np.abs(e).max())
    for _ in range(max_iter):
        ab[0, 1:] = e
        ab[1] = d - sigma
        ab[2, :-1] = e
        try:
            w = sla.solve_banded((1, 1), ab, v)
        except np.linalg.LinAlgError:
            sigma -= max(1e-12, 1e-10 * abs(sigma))
            continue
        v = w / np.linalg.norm(w)
        tv = d * v
        tv[:-1] += e * v[1:]
        tv[1:] += e * v[:-1]
        theta = float(v @ tv)
        residual = float(np.linalg.norm(tv - theta * v))
        scale = max(abs(theta), 1.0)
        if residual <= max(tol * scale, floor):
            return theta
        sigma = theta - max(residual, 1e-14 * scale)
    raise EigensolveError("inverse iteration did not converge", residual)


def _lowest_eig_dense(d: np.ndarray, e: np.ndarray) -> float:
    """Independent oracle route: LAPACK tridiagonal eigensolver."""
    vals = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)
    return float(vals[0])


# ---------------------------------------------------------------------------
# public fiber evaluations
# ---------------------------------------------------------------------------

def degennes_fiber_eigenvalue(xi: float, grid: Grid1D | None = None) -> float:
    """Lowest eigenvalue of the de Gennes fiber at Fourier parameter xi."""
    if grid is None:
        grid = Grid1D(0.0, DEFAULT_T_MAX, DEFAULT_N)
    return _lowest_eig_inverse_iteration(*_degennes_tridiag(xi, grid))


def degennes_fiber_eigenvalue_dense(xi: float, grid: Grid1D | None = None) -> float:
    if grid is None:
        grid = Grid1D(0.0, DEFAULT_T_MAX, DEFAULT_N)
    return _lowest_eig_dense(*_degennes_tridiag(xi, grid))


def _validate_step_a(a: float, allow_one: bool) -> None:
    hi = 1.0 + 1e-14 if allow_one else 1.0 - 1e-14
    if not (-1.0 - 1e-14 <= a <= hi) or a == 0.0:
        raise ValueError(f"field ratio a must lie in [-1,1) and be nonzero, got {a}")


def step_fiber_eigenvalue(a: float, xi: float, grid: Grid1D | None = None) -> float:
    """Lowest eigenvalue of the whole-line step fiber.

    a = 1 (uniform field, shifted harmonic oscillator) is accepted for
    validation only.
    """
    _validate_step_a(a, allow_one=True)
    if grid is None:
        grid = Grid1D(-DEFAULT_T_MAX, DEFAULT_T_MAX, 2 * DEFAULT_N - 1)
    return _lowest_eig_inverse_iteration(*_step_tridiag(a, xi, grid))


def step_fiber_eigenvalue_dense(a: float, xi: float, grid: Grid1D | None = None) -> float:
    _validate_step_a(a, allow_one=True)
    if grid is None:
        grid = Grid1D(-DEFAULT_T_MAX, DEFAULT_T_MAX, 2 * DEFAULT_N - 1)
    return _lowest_eig_dense(*_step_tridiag(a, xi, grid))


# ---------------------------------------------------------------------------
# band minima: Theta0 and beta_a
# ---------------------------------------------------------------------------

def _golden_minimize(f, lo: float, hi: float, width: float) -> tuple[float, float]:
    """Golden-section search for a unimodal minimum on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > width:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    xm = 0.5 * (lo + hi)
    return xm, f(xm)


def _band_minimum(eig, xi_lo: float, xi_hi: float, xi_step: float,
                  width: float) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Coarse scan of a band followed by golden-section refinement."""
    xis = np.arange(xi_lo, xi_hi + 0.5 * xi_step, xi_step)
    lams = np.array([eig(x) for x in xis])
    k = int(np.argmin(lams))
    if k == 0 or k == xis.size - 1:
        # minimum at the window edge; nothing to refine
        return xis, lams, float(xis[k]), float(lams[k])
    xi_star, lam_star = _golden_minimize(eig, xis[k - 1], xis[k + 1], width)
    if lam_star > lams[k]:
        xi_star, lam_star = float(xis[k]), float(lams[k])
    return xis, lams, xi_star, lam_star


_theta0_cache: dict = {}


def compute_theta0(tol: float) -> FiberEigenvalueCurve:
    """De Gennes constant: minimum over xi of the Neumann fiber band.

    The xi search is a coarse scan on [-2, 4] plus golden-section
    refinement to width tol; the grid is refined (h -> h/2) until the
    band minimum changes by less than tol between successive levels.
    The converged value is cached for :func:`theta0_value`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = Grid1D(0.0, DEFAULT_T_MAX, DEFAULT_N)
    width = min(tol, 1e-4)
    prev = None
    for _ in range(8):
        eig = lambda x: degennes_fiber_eigenvalue(x, grid)
        xis, lams, xi_star, lam_star = _band_minimum(eig, -2.0, 4.0, 0.05, width)
        if prev is not None and abs(lam_star - prev) < tol:
            curve = FiberEigenvalueCurve(xis, lams, xi_star, lam_star, grid)
            if not 0.0 < lam_star < 1.0:
                raise EigensolveError(f"Theta0 out of range: {lam_star}", 0.0)
            _theta0_cache["value"] = lam_star
            _theta0_cache["xi"] = xi_star
            return curve
        prev = lam_star
        grid = grid.refined()
    raise RefinementError("Theta0 grid refinement budget exhausted", (prev, lam_star))


def theta0_value() -> float:
    """Cached de Gennes constant; run compute_theta0 first."""
    if "value" not in _theta0_cache:
        raise RuntimeError("Theta0 not yet computed: run compute_theta0(tol) first")
    return _theta0_cache["value"]


def clear_theta0_cache() -> None:
    _theta0_cache.clear()


def _step_grid_for(a: float, xi_span: float, h: float) -> Grid1D:
    """Line grid wide enough to contain both potential wells plus margin.

    Wells sit at t = xi and t = xi/a; 12 units of margin keeps the
    Dirichlet truncation error far below solver tolerance.
    """
    t_max = max(DEFAULT_T_MAX, xi_span + 12.0, xi_span / abs(a) + 12.0)
    n = 2 * int(np.ceil(t_max / h)) + 1
    return Grid1D(-t_max, t_max, n)


def compute_beta(a: float, tol: float) -> FiberEigenvalueCurve:
    """Whole-plane step threshold beta_a: minimum over xi of the step band.

    Satisfies beta_a >= |a|*Theta0 (checked when Theta0 is cached) and
    beta_a <= 1.
    """
    _validate_step_a(a, allow_one=False)
    if tol <= 0:
        raise ValueError("tol must be positive")
    xi_lo, xi_hi = -8.0, 8.0
    h = DEFAULT_T_MAX / (DEFAULT_N - 1)
    grid = _step_grid_for(a, max(abs(xi_lo), abs(xi_hi)), h)
    width = min(tol, 1e-4)
    prev = None
    for _ in range(8):
        eig = lambda x: step_fiber_eigenvalue(a, x, grid)
        xis, lams, xi_star, lam_star = _band_minimum(eig, xi_lo, xi_hi, 0.1, width)
        if prev is not None and abs(lam_star - prev) < tol:
            curve = FiberEigenvalueCurve(xis, lams, xi_star, lam_star, grid)
            if "value" in _theta0_cache and lam_star < abs(a) * _theta0_cache["value"] - 10 * tol:
                raise EigensolveError(
                    f"beta_{a} = {lam_star} violates the |a|*Theta0 lower bound", 0.0)
            return curve
        prev = lam_star
        grid = Grid1D(grid.t_min, grid.t_max, 2 * grid.n - 1)
    raise RefinementError("beta_a grid refinement budget exhausted", (prev, lam_star))
