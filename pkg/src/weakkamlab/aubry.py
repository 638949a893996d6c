"""Projected Aubry set: estimation from slice data and from margins, plus classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import max_fiber_minimum, slice_means
from .errors import InconsistentLevel
from .grid import DEFAULT_N, GridField, nodes, periodic_distance
from .hyper import analyze_fixed_point, analyze_monodromy, find_fixed_points, orbit_monodromy
from .model import Covector, HamiltonianModel, branch_momenta
from .subsol import BOUNDARY_TOL, EPS_DEG, SubsolutionCertificate


@dataclass
class AubryPoint:
    x: float
    p: float
    cls: str = "unclassified"
    eigenvalues: list = field(default_factory=list)
    analysis: object = field(default=None, repr=False)

    def summary(self) -> dict:
        return {"x": self.x, "p": self.p, "class": self.cls, "eigenvalues": self.eigenvalues}


@dataclass
class AubryReport:
    mode: str
    alpha: float
    points: list
    boundary: bool = False
    section: GridField | None = field(default=None, repr=False)
    hypothesis_satisfied: bool | None = None
    circle_class: str | None = None
    notes: list = field(default_factory=list)
    monodromy: object = field(default=None, repr=False)

    @property
    def positions(self) -> np.ndarray:
        if self.mode == "full-circle" and self.section is not None:
            return self.section.x
        return np.array([pt.x for pt in self.points])

    def summary(self) -> dict:
        return {"mode": self.mode, "alpha": self.alpha, "boundary_case": self.boundary,
                "points": [pt.summary() for pt in self.points],
                "hypothesis_satisfied": self.hypothesis_satisfied,
                "circle_class": self.circle_class, "notes": list(self.notes)}


def aubry_estimate(model: HamiltonianModel, alpha: float, N: int = DEFAULT_N, eps_deg: float = EPS_DEG,
                   boundary_tol: float = BOUNDARY_TOL, level_tol: float = 1e-9) -> AubryReport:
    """Interior feasibility gives the degenerate-slice points, boundary feasibility the whole circle."""
    mm, mp = slice_means(model, alpha, N, tol=1e-9)
    x = nodes(N)
    if abs(mp) < boundary_tol or abs(mm) < boundary_tol:
        pm, pp = branch_momenta(model, x, alpha, tol=1e-9)
        X = pp if abs(mp) < boundary_tol else pm
        return AubryReport("full-circle", alpha, [], boundary=True, section=GridField(X - X.mean()),
                           notes=[f"slice means [{mm:.3e}, {mp:.3e}]"])
    if not (mm < 0.0 < mp):
        raise InconsistentLevel(f"slice means [{mm:.3e}, {mp:.3e}] do not bracket 0: alpha={alpha} is off")
    fm = max_fiber_minimum(model, N)
    if abs(fm.value - alpha) > level_tol:
        raise InconsistentLevel(
            f"interior feasibility at alpha={alpha} but max c_min = {fm.value}: alpha is not critical"
        )
    pts = []
    for xs in fm.points:
        pm, pp = branch_momenta(model, xs, alpha, tol=1e-9)
        if float(pp - pm) <= eps_deg:
            pts.append(AubryPoint(float(xs), float(0.5 * (pm + pp))))
    if not pts:
        raise InconsistentLevel("no degenerate slice at the critical level")
    return AubryReport("finite-points", alpha, pts)


def aubry_from_margin(cert: SubsolutionCertificate) -> np.ndarray:
    """Representatives of the zero-margin components of a certificate.

    Contiguous runs (cyclically) of nodes with delta <= eps_deg form one
    component, represented by its node of least margin.  If every node is
    degenerate the whole grid is returned.
    """
    d = cert.delta.values
    N = d.size
    mask = d <= cert.eps_deg
    if mask.all():
        return nodes(N)
    if not mask.any():
        return np.array([])
    # rotate so that index 0 is outside every run
    start = int(np.flatnonzero(~mask)[0])
    order = (start + np.arange(N)) % N
    m = mask[order]
    reps = []
    i = 0
    while i < N:
        if m[i]:
            j = i
            while j < N and m[j]:
                j += 1
            run = order[i:j]
            reps.append(int(run[np.argmin(d[run])]))
            i = j
        else:
            i += 1
    return np.sort(np.array(reps) / N)


def classify_aubry(model: HamiltonianModel, report: AubryReport, spectral_tol: float = 1e-8,
                   separatrix_tol: float = 1e-6) -> AubryReport:
    """Attach fixed-point or periodic-orbit data and decide the hyperbolicity hypothesis."""
    if report.mode == "finite-points":
        fps = find_fixed_points(model)
        ok = True
        for pt in report.points:
            near = [f for f in fps if periodic_distance(f.x, pt.x) < 1e-6 and abs(f.p - pt.p) < 1e-6]
            if not near:
                pt.cls = "unclassified"
                ok = False
                continue
            an = analyze_fixed_point(model, near[0], spectral_tol)
            pt.analysis = an
            pt.eigenvalues = [[float(e.real), float(e.imag)] for e in an.eigenvalues]
            pt.cls = "hyperbolic-fixed-point" if an.hyperbolic else "non-hyperbolic-fixed-point"
            ok &= an.hyperbolic
        report.hypothesis_satisfied = bool(ok)
        return report
    # full circle: the section is an invariant graph of the flow
    X = report.section.values
    x = report.section.x
    speed = model.H_p(x, X)
    fm = max_fiber_minimum(model, report.section.N)
    if report.alpha - fm.value <= separatrix_tol:
        # the level touches the fiber minimum: the graph runs through fixed points
        report.circle_class = "separatrix"
        report.points = [AubryPoint(float(xf), float(-model.P), "fixed-point-on-separatrix") for xf in fm.points]
        report.notes.append("Aubry set is the whole graph of the section, which passes through a fixed point")
    else:
        report.circle_class = "invariant-circle"
        T = float(np.mean(1.0 / np.abs(speed)))
        M = orbit_monodromy(model, float(x[0]), float(X[0]), T)
        mono = analyze_monodromy(M, spectral_tol=spectral_tol)
        report.monodromy = mono
        report.notes.append(
            f"periodic orbit of period {T:.6g}; eigenvalue 1 has multiplicity {mono.multiplicity_one} "
            "in dimension 2, so it is not hyperbolic; the smooth section solves the equation anyway"
        )
    report.hypothesis_satisfied = False
    return report
