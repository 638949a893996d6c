"""Smooth critical sub-solutions: perturb by a sharp potential, localize, glue.

Near each hyperbolic Aubry point the local solution (primitive of the
unstable one-form p_u of H + V0) is kept; far from it the mollified strict
sub-solution of H + V0 (slope q_s, margin delta_s) is kept.  The default
glue combines slopes with a C-infinity radial cutoff chi,

    g = chi p_u + (1 - chi) q_s,

and by convexity its margin for the original H is at least

    V0 + (1 - chi) delta_s + 1/2 a chi (1 - chi) (p_u - q_s)^2 >= 0.

The mean of g is removed where delta_s is large, away from the Aubry set,
and w is the exact discrete primitive of the corrected slope.  Gluing values
instead (w = chi (u_loc + k) + (1 - chi) u_s) is available but adds a term
chi' (u_loc + k - u_s) that the margin does not control.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .aubry import AubryReport, aubry_estimate, aubry_from_margin, classify_aubry
from .critical import alpha as compute_alpha
from .errors import BlendMarginFailure, ConfigError, HypothesisNotSatisfied, WeakKamError
from .grid import DEFAULT_N, GridField, central_primitive, fd_derivative, gradient, nodes, periodic_distance, set_distance, smooth_step, wrap_signed
from .hyper import LocalSolution, analyze_fixed_point, find_fixed_points, local_solution, unstable_oneform
from .model import HamiltonianModel
from .subsol import (SubsolutionCertificate, mollify_subsolution, perturbed_model, sharp_potential,
                     strict_subsolution)
from .weakkam import DEFAULT_H

log = logging.getLogger(__name__)

SMOOTH_VERIFY_TOL = 1e-8


@dataclass
class SmoothSubsolutionResult:
    alpha: float
    w: GridField
    dw: GridField
    eta: GridField
    aubry_points: np.ndarray
    radii: tuple
    strict_floor: float
    eta_at_aubry: float
    germ_error: float
    smoothness: dict = field(default_factory=dict)
    trace: dict = field(default_factory=dict)
    verify_tol: float = SMOOTH_VERIFY_TOL

    @property
    def min_eta(self) -> float:
        return float(self.eta.values.min())

    @property
    def passed(self) -> bool:
        ok = self.min_eta >= -self.verify_tol and self.strict_floor > 0.0
        if self.smoothness:
            ok = ok and bool(self.smoothness.get("passed", True))
        return ok

    def summary(self) -> dict:
        return {"alpha": self.alpha, "N": self.w.N, "min_eta": self.min_eta, "strict_floor": self.strict_floor,
                "eta_at_aubry": self.eta_at_aubry, "germ_error": self.germ_error,
                "radii": list(self.radii), "aubry_points": [float(p) for p in self.aubry_points],
                "smoothness": self.smoothness, "passed": self.passed, "verify_tol": self.verify_tol,
                "trace": self.trace}


def cutoff(r, r_in: float, r_out: float):
    """1 on r <= r_in, 0 on r >= r_out, smooth in between."""
    return 1.0 - smooth_step((np.asarray(r, float) - r_in) / (r_out - r_in))


def _margin(model, alpha, w):
    dw = gradient(GridField(w))
    return dw, alpha - model.H(dw.x, dw.values)


def _chart_nodes(loc: LocalSolution, N: int, r_out: float):
    x = nodes(N)
    idx, uloc = loc.to_field(N)
    s = wrap_signed(x[idx] - loc.chart.center.x)
    keep = np.abs(s) < r_out + 3.0 / N
    return idx[keep], uloc[keep], s[keep]


def _slope_blend(model, locals_, u_smooth, r_in, r_out, alpha):
    """w' = chi p_u + (1 - chi) q_s - m psi, integrated exactly for the central scheme.

    By convexity the blended slope has margin V0 + (1 - chi) delta_s +
    1/2 a chi (1 - chi) (p_u - q_s)^2 >= 0 for H; the mean defect m is then
    removed by a smooth weight psi supported beyond r_out + (r_out - r_in),
    proportional to delta_s / |H_p| so the relative margin loss is uniform.
    """
    N = u_smooth.N
    x = nodes(N)
    qs = u_smooth.q.values
    g = qs.copy()
    env = np.ones(N)
    pad = r_out - r_in
    for loc in locals_:
        idx, _, s = _chart_nodes(loc, N, r_out)
        chi = cutoff(np.abs(s), r_in, r_out)
        g[idx] = chi * loc.chart.evaluate(s) + (1.0 - chi) * qs[idx]
        env *= 1.0 - cutoff(periodic_distance(x, loc.chart.center.x), r_out, r_out + pad)
    m = float(g.mean())
    hp = model.H_p(x, g)
    tau = 1e-3 * float(np.max(np.abs(hp)))
    weight = env * np.maximum(u_smooth.delta.values, 0.0) / np.sqrt(hp * hp + tau * tau)
    if m != 0.0:
        if not np.any(weight > 0):
            raise BlendMarginFailure("no margin left to absorb the mean defect of the blend")
        g = g - m * weight / weight.mean()
    g = g - g.mean()
    w = central_primitive(GridField(g)).values
    return w, {"mean_defect": m}


def _value_blend(model, locals_, u_smooth, r_in, r_out, alpha, anchoring):
    N = u_smooth.N
    us = u_smooth.u.values.copy()
    w = us.copy()
    ks = []
    for loc in locals_:
        idx, uloc, s = _chart_nodes(loc, N, r_out)
        chi = cutoff(np.abs(s), r_in, r_out)
        r_mid = 0.5 * (r_in + r_out)
        sides = []
        for sgn in (1.0, -1.0):
            j = int(np.argmin(np.abs(s - sgn * r_mid)))
            sides.append(us[idx[j]] - uloc[j])
        ring = np.unique(np.concatenate([(idx + o) % N for o in (-1, 0, 1)]))
        base = w.copy()

        def assemble(k):
            out = base.copy()
            out[idx] = us[idx] + chi * (uloc + k - us[idx])
            return out

        def worst(k):
            _, eta = _margin(model, alpha, assemble(k))
            return float(eta[ring].min())

        if anchoring == "midpoint":
            k = 0.5 * (sides[0] + sides[1])
        elif anchoring == "maxmin":
            lo, hi = min(sides), max(sides)
            pad = max(hi - lo, 1e-6)
            res = minimize_scalar(lambda k: -worst(k), bounds=(lo - pad, hi + pad), method="bounded",
                                  options={"xatol": 1e-12})
            k = float(res.x)
            for cand in sides:
                if worst(cand) > worst(k):
                    k = float(cand)
        else:
            raise ConfigError(f"unknown anchoring {anchoring!r}")
        w = assemble(k)
        ks.append(float(k))
    return w, {"anchors": ks}


def glue(model: HamiltonianModel, locals_: list, u_smooth: SubsolutionCertificate, aubry: AubryReport,
         radii=(0.05, 0.12), alpha: float | None = None, blend: str = "slope", anchoring: str = "maxmin",
         verify_tol: float = SMOOTH_VERIFY_TOL) -> SmoothSubsolutionResult:
    """Blend local solutions into the mollified strict sub-solution; verify for ``model``.

    ``model`` is the original Hamiltonian; ``u_smooth`` and the local
    solutions belong to the perturbed one.  ``blend="slope"`` combines
    slopes (see ``_slope_blend``); ``blend="value"`` combines values,
    w = chi (u_loc + k) + (1 - chi) u_s, with the anchoring constant k either
    maximizing the least annulus margin (``"maxmin"``, min eta is concave in
    k) or matching at the blend midpoints (``"midpoint"``).
    """
    r_in, r_out = map(float, radii)
    if not 0.0 < r_in < r_out:
        raise ConfigError("blend radii must satisfy 0 < r_in < r_out")
    alpha = u_smooth.c if alpha is None else float(alpha)
    N = u_smooth.N
    x = nodes(N)
    centers = np.array([loc.chart.center.x for loc in locals_])
    if centers.size > 1:
        gaps = periodic_distance(centers[:, None], centers[None, :]) + np.eye(centers.size)
        if gaps.min() < 2.0 * r_out:
            raise ConfigError("blend annuli of distinct Aubry points overlap; shrink the radii")
    for loc in locals_:
        if loc.chart.radius < r_out + 2.0 / N:
            raise ConfigError("chart radius must exceed the outer blend radius")
    if not locals_:
        w, info = u_smooth.u.values.copy(), {}
    elif blend == "slope":
        w, info = _slope_blend(model, locals_, u_smooth, r_in, r_out, alpha)
    elif blend == "value":
        w, info = _value_blend(model, locals_, u_smooth, r_in, r_out, alpha, anchoring)
    else:
        raise ConfigError(f"unknown blend {blend!r}")
    dw, eta = _margin(model, alpha, w)
    if eta.min() < -verify_tol:
        i = int(np.argmin(eta))
        raise BlendMarginFailure(f"blend margin {eta[i]:.3e} at x={x[i]:.6f}", worst_node=i,
                                 worst_margin=float(eta[i]))
    pts = aubry.positions if aubry.mode == "finite-points" else np.array([])
    if pts.size:
        dist = periodic_distance(x[:, None], pts[None, :]).min(axis=1)
        far = dist >= r_out
        floor = float(eta[far].min()) if far.any() else math.inf
        near_nodes = np.unique(np.rint(pts * N).astype(np.int64) % N)
        at_aubry = float(eta[near_nodes].max())
    else:
        floor, at_aubry = float(eta.min()), math.nan
    germ = 0.0
    for loc in locals_:
        idx, _, s = _chart_nodes(loc, N, r_out)
        inner = np.abs(s) <= r_in
        if inner.any():
            germ = max(germ, float(np.max(np.abs(dw.values[idx[inner]] - loc.chart.evaluate(s[inner])))))
    trace = {"blend": blend, **info, "charts": [
        {"center": loc.chart.center.x, "p": loc.chart.center.p, "radius": loc.chart.radius,
         "slope": loc.chart.slope, "center_slope": loc.chart.center_slope, "defect": loc.chart.defect}
        for loc in locals_]}
    if blend == "value":
        trace["anchoring"] = anchoring
    return SmoothSubsolutionResult(alpha, GridField(w), dw, GridField(eta), pts, (r_in, r_out), floor, at_aubry,
                                   germ, trace=trace, verify_tol=verify_tol)


def smoothness_report(w_coarse: GridField, w_fine: GridField, factor: float = 2.0) -> dict:
    """Sup norms of discrete derivatives of order 1..4 at two resolutions."""
    out = {"N": [w_coarse.N, w_fine.N]}
    for k in range(1, 5):
        a = float(np.max(np.abs(fd_derivative(w_coarse.values, k))))
        b = float(np.max(np.abs(fd_derivative(w_fine.values, k))))
        out[f"order{k}"] = [a, b]
    a, b = out["order4"]
    ratio = b / a if a > 0 else (1.0 if b == 0 else math.inf)
    out["ratio4"] = ratio
    out["passed"] = bool(1.0 / factor <= ratio <= factor)
    return out


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except WeakKamError as exc:
        exc.stage = name
        if not str(exc).startswith(f"[{name}]"):
            exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        raise


def _build(model, a, N, radii, width, eps, chart_radius, blend, anchoring, verify_tol, report=None):
    cert = _stage("strict", strict_subsolution, model, a, N)
    if report is None:
        report = _stage("aubry", aubry_estimate, model, a, N)
        report = classify_aubry(model, report)
    if not report.hypothesis_satisfied:
        kinds = report.circle_class or ", ".join(pt.cls for pt in report.points)
        raise HypothesisNotSatisfied(
            f"Aubry set is not a finite union of hyperbolic fixed points (mode={report.mode}: {kinds})"
        )
    pts = report.positions
    from_margin = aubry_from_margin(cert)
    V0 = _stage("sharp", sharp_potential, model, cert, pts, width)
    Hv = perturbed_model(model, V0)
    cert_v = _stage("strict-perturbed", strict_subsolution, Hv, a, N)
    moll = _stage("mollify", mollify_subsolution, Hv, cert_v, eps, a)
    x = nodes(N)
    fps = find_fixed_points(Hv)
    locs = []
    for pt in report.points:
        near = [f for f in fps if periodic_distance(f.x, pt.x) < 1e-6]
        an = analyze_fixed_point(Hv, near[0])
        r = chart_radius
        offs = wrap_signed(x - an.point.x)
        chart = _stage("chart", unstable_oneform, Hv, an, a, r, N, offs[np.abs(offs) <= r])
        locs.append(local_solution(chart))
    res = _stage("glue", glue, model, locs, moll, report, radii, a, blend, anchoring, verify_tol)
    res.trace.update({
        "V0": V0.summary(pts), "mollify_width": eps, "sharp_width": width,
        "mollified_min_margin_perturbed": moll.min_margin,
        "aubry_margin_distance": set_distance(from_margin, pts),
        "eigenvalues_perturbed": [pt_an for pt_an in (
            [[float(e.real), float(e.imag)] for e in analyze_fixed_point(Hv, f).eigenvalues]
            for f in fps if any(periodic_distance(f.x, p) < 1e-6 for p in pts))],
    })
    return res, report


def smooth_subsolution(model: HamiltonianModel, N: int = DEFAULT_N, h: float = DEFAULT_H, radii=(0.05, 0.12),
                       width: float = 0.01, eps: float = 0.005, chart_radius: float = 0.2,
                       blend: str = "slope", anchoring: str = "maxmin", verify_tol: float = SMOOTH_VERIFY_TOL,
                       refine: bool = True, alpha_value: float | None = None,
                       max_shrink: int = 4) -> SmoothSubsolutionResult:
    """Full pipeline; the result is verified against the original model.

    With ``refine`` the construction is repeated at 2N for the smoothness
    proxy (order-4 discrete derivative sup norms within a factor of two).
    """
    if alpha_value is None:
        est = _stage("alpha", compute_alpha, model, N, h)
        a, alpha_trace = est.value, {"value": est.value, "error": est.error, **est.diagnostics}
    else:
        a, alpha_trace = float(alpha_value), {"value": float(alpha_value), "given": True}
    r_in, r_out = radii
    attempt = 0
    report = None
    while True:
        try:
            res, report = _build(model, a, N, (r_in, r_out), width, eps, chart_radius, blend, anchoring, verify_tol, report)
            break
        except BlendMarginFailure as exc:
            attempt += 1
            if attempt > max_shrink:
                raise
            log.info("blend failed (%s); shrinking radii", exc)
            r_in, r_out = 0.8 * r_in, 0.8 * r_out
    res.trace["alpha"] = alpha_trace
    res.trace["shrinks"] = attempt
    res.trace["aubry"] = report.summary()
    if refine:
        fine, _ = _build(model, a, 2 * N, (r_in, r_out), width, eps, chart_radius, blend, anchoring, verify_tol, None)
        res.smoothness = smoothness_report(res.w, fine.w)
        res.trace["fine"] = {"min_eta": fine.min_eta, "strict_floor": fine.strict_floor,
                             "eta_at_aubry": fine.eta_at_aubry}
    return res
