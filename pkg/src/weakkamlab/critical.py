"""Critical value alpha(H) by two independent methods.

``alpha_branch`` uses the circle characterization: a sub-solution at level c
exists iff c >= max_x c_min(x) and the slice integrals bracket zero,
mean p-(., c) <= 0 <= mean p+(., c).  ``alpha_lo`` reads alpha off the drift
of the Lax-Oleinik iteration.  ``alpha`` runs both and reconciles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import BracketFailure, DidNotConverge, MethodDisagreement
from .grid import DEFAULT_N, check_resolution, nodes
from .model import HamiltonianModel, branch_momenta
from .weakkam import DEFAULT_H, weak_kam_solve

log = logging.getLogger(__name__)

# allowance for the O(h^2, dx^2) bias of the discrete drift
LO_DISCRETIZATION = 1e-3


@dataclass
class AlphaEstimate:
    value: float
    method: str
    error: float
    bracket: tuple = (math.nan, math.nan)
    diagnostics: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"alpha={self.value:.6f} method={self.method} err={self.error:.3g}"


@dataclass
class FiberMaximum:
    value: float
    points: np.ndarray


def max_fiber_minimum(model: HamiltonianModel, N: int = DEFAULT_N, rel_tol: float = 1e-9) -> FiberMaximum:
    """max_x c_min(x), polished below grid resolution, with all near-maximizers."""
    x = nodes(N)
    cm = model.potential(x)
    top = float(cm.max())
    # curvature allowance: a maximizer between nodes lowers node values by <= |c''| dx^2 / 8
    slack = float(np.max(np.abs(model.potential(x, 2)))) * (1.0 / N) ** 2 / 8.0 + 1e-14
    local = (cm >= np.roll(cm, 1)) & (cm >= np.roll(cm, -1)) & (cm >= top - 4.0 * slack)
    pts, vals = [], []
    for i in np.flatnonzero(local):
        xi = x[i]
        res = minimize_scalar(lambda s: -float(model.potential(s)), bounds=(xi - 1.0 / N, xi + 1.0 / N),
                              method="bounded", options={"xatol": 1e-13})
        xs, vs = float(res.x), -float(res.fun)
        if vs < cm[i]:
            xs, vs = float(xi), float(cm[i])
        pts.append(xs % 1.0)
        vals.append(vs)
    vals = np.array(vals)
    best = float(vals.max())
    keep = vals >= best - rel_tol * max(1.0, abs(best))
    pts = np.array(pts)[keep]
    return FiberMaximum(best, merge_points(pts, 2.0 / N))


def merge_points(pts, radius: float) -> np.ndarray:
    """Drop points within ``radius`` (on the circle) of an earlier kept one."""
    kept = []
    for p in np.sort(np.asarray(pts, float) % 1.0):
        if all(min(abs(p - q), 1.0 - abs(p - q)) > radius for q in kept):
            kept.append(float(p))
    return np.array(kept)


def slice_means(model: HamiltonianModel, c: float, N: int = DEFAULT_N, tol: float = 1e-12):
    """Grid means of p-(., c) and p+(., c) (periodic trapezoid rule)."""
    pm, pp = branch_momenta(model, nodes(N), c, tol=tol)
    return float(pm.mean()), float(pp.mean())


def _feasibility(model, c, N):
    lo, hi = slice_means(model, c, N, tol=1e-9)
    return min(hi, -lo)


def _alpha_branch_at(model: HamiltonianModel, N: int, c_lo: float, xtol: float):
    g0 = _feasibility(model, c_lo, N)
    if g0 >= 0.0:
        return c_lo, (c_lo, c_lo), True, 0
    c_up = c_lo + (1.0 + abs(model.P)) ** 2 + 1.0
    doublings = 0
    while _feasibility(model, c_up, N) < 0.0:
        c_up = c_lo + 2.0 * (c_up - c_lo)
        doublings += 1
        if doublings > 60:
            raise BracketFailure("upper bracket never became feasible")
    root = brentq(lambda c: _feasibility(model, c, N), c_lo, c_up, xtol=xtol, rtol=4 * np.finfo(float).eps,
                  maxiter=500)
    lo, hi = root - xtol, root + xtol
    lo = max(lo, c_lo)
    return root, (lo, hi), False, doublings


def alpha_branch(model: HamiltonianModel, N: int = DEFAULT_N, xtol: float = 1e-13) -> AlphaEstimate:
    """Smallest c with max c_min <= c and mean p- <= 0 <= mean p+.

    The touching case (already feasible at c = max c_min) returns max c_min
    itself.  The error estimate is the change under grid doubling.
    """
    N = check_resolution(N)
    fm = max_fiber_minimum(model, N)
    c_lo = fm.value
    val, bracket, touching, doublings = _alpha_branch_at(model, N, c_lo, xtol)
    val2, *_ = _alpha_branch_at(model, 2 * N, c_lo, xtol)
    err = max(abs(val2 - val), 2.0 * xtol, 1e-12)
    diag = {"N": N, "c_min_max": c_lo, "touching": touching, "doublings": doublings,
            "richardson": abs(val2 - val), "argmax": [float(p) for p in fm.points]}
    return AlphaEstimate(float(val), "branch-bisection", float(err), bracket, diag)


def alpha_lo(model: HamiltonianModel, N: int = DEFAULT_N, h: float = DEFAULT_H, max_iter: int = 2000,
             tol: float = 1e-11) -> AlphaEstimate:
    """alpha = -drift of the Lax-Oleinik iteration at level 0.

    When the normalized iterates settle, the increments bracket the discrete
    critical value rigorously.  When they keep oscillating (a rotating Aubry
    set makes the shape converge slowly) the drift is the mean increment over
    the second half of the run and the error term includes its disagreement
    with the last quarter.
    """
    sol = weak_kam_solve(model, 0.0, N=N, h=h, tol=tol, max_iter=max_iter, require_convergence=False)
    inc = sol.increments
    n = inc.size
    if sol.converged:
        value = -float(inc[-1]) / h
        stat = sol.residual / h
    else:
        half = inc[n // 2:]
        quarter = inc[(3 * n) // 4:]
        if half.size < 20:
            raise DidNotConverge("too few sweeps to estimate the drift", partial=sol)
        value = -float(half.mean()) / h
        stat = abs(float(half.mean() - quarter.mean())) / h + float(half.std()) / h / math.sqrt(half.size)
    err = stat + LO_DISCRETIZATION
    diag = {"N": N, "h": h, "iterations": sol.iterations, "converged": sol.converged,
            "residual": sol.residual, "statistical": stat}
    return AlphaEstimate(value, "lo-drift", err, (value - err, value + err), diag)


def alpha(model: HamiltonianModel, N: int = DEFAULT_N, h: float = DEFAULT_H, lo_max_iter: int = 2000) -> AlphaEstimate:
    br = alpha_branch(model, N)
    lo = alpha_lo(model, N, h, max_iter=lo_max_iter)
    gap = abs(br.value - lo.value)
    if gap > br.error + lo.error:
        raise MethodDisagreement(
            f"branch {br.value:.9g} and drift {lo.value:.9g} differ by {gap:.3e}", branch=br, lo=lo
        )
    diag = dict(br.diagnostics)
    diag["lo_value"] = lo.value
    diag["lo_error"] = lo.error
    diag["agreement"] = gap
    return AlphaEstimate(br.value, br.method, br.error, br.bracket, diag)
