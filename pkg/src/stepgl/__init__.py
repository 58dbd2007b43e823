"""stepgl: spectral thresholds and Ginzburg-Landau minimizers for step magnetic fields.

Layers, bottom up:

* spectral1d  - fibered 1D eigenproblems: the de Gennes constant Theta0
                and the whole-plane step threshold beta_a;
* halfplane   - the wedge operator on the truncated half-plane and its
                ground energy mu(alpha, a) with bound-state certification;
* effective   - the nonlinear effective energy E(b) of one edge-boundary
                intersection point;
* gldomain    - full Ginzburg-Landau minimization on a disk cut by a
                straight magnetic edge;
* diagnostics - concentration, decay and critical-field measurements;
* gridio/cli  - reproducible runs, records, grid dumps and CSV exports.
"""

from . import diagnostics, effective, gldomain, gridio, halfplane, spectral1d

__version__ = "0.1.0"
__all__ = ["spectral1d", "halfplane", "effective", "gldomain", "diagnostics", "gridio"]
