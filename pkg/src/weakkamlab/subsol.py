"""Sub-solutions: construction, verification, sharp potentials and mollification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import slice_means
from .errors import BoundaryCase, ConfigError, NoSubsolutionAtLevel, VerificationFailed
from .grid import (DEFAULT_N, GridField, KernelSmoothed, TrigInterpolant, check_resolution, erode,
                   gradient, kernel_weights, mollify, nodes, periodic_distance, primitive)
from .model import HamiltonianModel, branch_momenta

EPS_DEG = 1e-6
BOUNDARY_TOL = 1e-8
VERIFY_TOL = 1e-6


@dataclass
class SubsolutionCertificate:
    c: float
    u: GridField
    q: GridField
    delta: GridField
    eps_deg: float = EPS_DEG
    verify_tol: float = VERIFY_TOL
    boundary: bool = False
    lam: float = math.nan
    meta: dict = field(default_factory=dict)
    margin_bound: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.u.N

    @property
    def min_margin(self) -> float:
        return float(np.min(self.delta.values))

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.verify_tol

    @property
    def degenerate_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.delta.values <= self.eps_deg)

    @property
    def degenerate_points(self) -> np.ndarray:
        return self.degenerate_nodes / self.N

    def summary(self) -> dict:
        return {
            "level": self.c, "N": self.N, "min_margin": self.min_margin,
            "max_margin": float(np.max(self.delta.values)), "passed": self.passed,
            "boundary_case": self.boundary, "lambda": self.lam,
            "degenerate_count": int(self.degenerate_nodes.size), "verify_tol": self.verify_tol,
            **self.meta,
        }


def margin(model: HamiltonianModel, q: GridField, c: float) -> GridField:
    return GridField(c - model.H(q.x, q.values))


def strict_subsolution(model: HamiltonianModel, alpha: float, N: int = DEFAULT_N, eps_deg: float = EPS_DEG,
                       boundary_tol: float = BOUNDARY_TOL) -> SubsolutionCertificate:
    """Max-margin sub-solution at level alpha by blending the slice endpoints.

    q = lam p+ + (1 - lam) p- with lam chosen so that q has mean zero; it is
    strict wherever the slice is non-degenerate because H is strictly convex
    in p.  If one endpoint already has mean zero the slope is forced.
    """
    N = check_resolution(N)
    x = nodes(N)
    pm, pp = branch_momenta(model, x, alpha, tol=1e-9)
    mm, mp = float(pm.mean()), float(pp.mean())
    if mm > boundary_tol or mp < -boundary_tol:
        raise NoSubsolutionAtLevel(
            f"slice means [{mm:.3e}, {mp:.3e}] do not bracket 0 at level {alpha}"
        )
    boundary = abs(mp) < boundary_tol or abs(mm) < boundary_tol
    if abs(mp) < boundary_tol:
        lam, q = 1.0, pp.copy()
    elif abs(mm) < boundary_tol:
        lam, q = 0.0, pm.copy()
    else:
        lam = -mm / (mp - mm)
        q = lam * pp + (1.0 - lam) * pm
    q -= q.mean()
    qf = GridField(q)
    u = primitive(qf)
    delta = margin(model, qf, alpha)
    return SubsolutionCertificate(alpha, u, qf, delta, eps_deg=eps_deg, boundary=boundary, lam=lam,
                                  meta={"construction": "branch-blend", "slice_means": [mm, mp]})


def verify_subsolution(model: HamiltonianModel, u: GridField, c: float, verify_tol: float = VERIFY_TOL,
                       method: str = "central", eps_deg: float = EPS_DEG, strict: bool = True) -> SubsolutionCertificate:
    """Check H(x, du) <= c + verify_tol at every node with the discrete gradient."""
    q = gradient(u, method)
    delta = margin(model, q, c)
    cert = SubsolutionCertificate(c, u, q, delta, eps_deg=eps_deg, verify_tol=verify_tol,
                                  meta={"construction": f"verified-{method}"})
    if strict and not cert.passed:
        i = int(np.argmin(delta.values))
        raise VerificationFailed(
            f"margin {delta.values[i]:.3e} < -{verify_tol:g} at x={i / u.N:.6f}",
            worst_node=i, worst_margin=float(delta.values[i]),
        )
    return cert


# --- sharp potentials -------------------------------------------------------


def flatten(s, eps: float, deriv: int = 0):
    """F(s) = s exp(-eps / s) for s > 0, 0 otherwise; flat to all orders at 0."""
    s = np.asarray(s, dtype=float)
    pos = s > 0
    sp = np.where(pos, s, 1.0)
    e = np.where(pos, np.exp(-eps / sp), 0.0)
    if deriv == 0:
        return np.where(pos, s * e, 0.0)
    if deriv == 1:
        return e * (1.0 + eps / sp)
    if deriv == 2:
        return e * eps * eps / sp**3
    raise ConfigError("flatten derivatives up to order 2")


class SharpPotential:
    """V0 = 1/2 F(s) with s a kernel-smoothed erosion of the margin field.

    Usable directly as an extra potential term on a model (``value``, ``d1``,
    ``d2``).  It vanishes identically within ``r_zero`` of the zero set of
    the margin, is strictly positive at nodes farther than ``r_flat``, and
    satisfies 2 V0 <= delta at every node.
    """

    label = "sharp-potential"

    def __init__(self, delta: GridField, width: float = 0.01, eps_f: float = 1e-2, factor: float = 0.5,
                 zero_tol: float = 0.0):
        if not 0.0 < width < 0.1:
            raise ConfigError("sharp potential width must lie in (0, 0.1)")
        self.width = float(width)
        self.eps_f = float(eps_f)
        self.factor = float(factor)
        base = np.where(delta.values > zero_tol, delta.values, 0.0)
        self.eroded = erode(GridField(base), 2.0 * width)
        self.smoother = KernelSmoothed(self.eroded.values, width)
        self.N = delta.N
        self.field = GridField(self.value(nodes(self.N)))
        self.r_zero = width + 0.5 / self.N
        self.r_flat = 3.0 * width + 2.0 / self.N

    def _s(self, x):
        return self.smoother.evaluate(x)

    def value(self, x):
        s, _, _ = self._s(x)
        return self.factor * flatten(s, self.eps_f)

    def d1(self, x):
        s, s1, _ = self._s(x)
        return self.factor * flatten(s, self.eps_f, 1) * s1

    def d2(self, x):
        s, s1, s2 = self._s(x)
        return self.factor * (flatten(s, self.eps_f, 2) * s1 * s1 + flatten(s, self.eps_f, 1) * s2)

    def floor_outside(self, points, radius: float | None = None) -> float:
        """min V0 over nodes at distance > radius from ``points``."""
        radius = self.r_flat if radius is None else radius
        x = nodes(self.N)
        pts = np.atleast_1d(points)
        if pts.size == 0:
            return float(self.field.values.min())
        dist = periodic_distance(x[:, None], pts[None, :]).min(axis=1)
        far = dist > radius
        return float(self.field.values[far].min()) if np.any(far) else math.inf

    def summary(self, points=()) -> dict:
        return {"width": self.width, "eps_f": self.eps_f, "max": float(self.field.values.max()),
                "r_flat": self.r_flat, "floor_outside": self.floor_outside(points)}


def sharp_potential(model: HamiltonianModel, cert: SubsolutionCertificate, aubry=(), width: float = 0.01,
                    eps_f: float = 1e-2) -> SharpPotential:
    if cert.boundary or float(cert.delta.values.max()) <= cert.eps_deg:
        raise BoundaryCase("margin vanishes identically: no strict sub-solution, no sharp potential")
    V0 = SharpPotential(cert.delta, width, eps_f, zero_tol=cert.eps_deg)
    pts = np.atleast_1d(np.asarray(aubry, float))
    if pts.size:
        vals = V0.value(pts)
        if np.any(vals != 0.0):
            raise ConfigError("sharp potential does not vanish on the Aubry estimate")
    return V0


def perturbed_model(model: HamiltonianModel, V) -> HamiltonianModel:
    """H + V; a GridField is turned into its trigonometric interpolant first."""
    term = TrigInterpolant(V) if isinstance(V, GridField) else V
    if not all(hasattr(term, k) for k in ("value", "d1", "d2")):
        raise ConfigError("potential term needs value, d1 and d2 evaluators")
    return model.with_potential(term)


# --- mollification ----------------------------------------------------------


def jensen_margin_bound(model: HamiltonianModel, q: GridField, delta: GridField, width: float) -> np.ndarray:
    """Pointwise lower bound for the margin of the kernel average of q.

    By convexity of H in p, H(x, sum w_k q(x - y_k)) <= sum w_k H(x, q(x - y_k)),
    and H(x, q(x - y)) = H(x - y, q(x - y)) + [H(x, q(x-y)) - H(x - y, q(x-y))].
    """
    offsets, w = kernel_weights(width, q.N)
    x = nodes(q.N)
    out = np.zeros(q.N)
    for k, wk in zip(offsets, w):
        qs = np.roll(q.values, k)
        ds = np.roll(delta.values, k)
        shift = (x - k / q.N) % 1.0
        out += wk * (ds - (model.H(x, qs) - model.H(shift, qs)))
    return out


def mollify_subsolution(model: HamiltonianModel, cert: SubsolutionCertificate, eps: float, c: float | None = None,
                        verify_tol: float = VERIFY_TOL, strict: bool = True) -> SubsolutionCertificate:
    """u_eps = mollify(u, eps), re-certified at level c with the central gradient.

    Away from the degenerate set of ``cert`` the margin must stay above
    -verify_tol.  Within eps of it the input had no margin to spend, and the
    x-dependence of H can push the averaged slope slightly above the level;
    that deficit is predicted by the Jensen bound, checked against it, and
    added to the tolerance recorded on the returned certificate.
    """
    c = cert.c if c is None else c
    ue = mollify(cert.u, eps)
    base = verify_subsolution(model, cert.u, c, strict=False, eps_deg=cert.eps_deg)
    bound = jensen_margin_bound(model, base.q, base.delta, eps)
    out = verify_subsolution(model, ue, c, verify_tol=verify_tol, strict=False, eps_deg=cert.eps_deg)
    d = out.delta.values
    x = nodes(ue.N)
    near = np.zeros(ue.N, bool)
    r = int(math.ceil(eps * ue.N)) + 1
    for j in cert.degenerate_nodes:
        near[(j + np.arange(-r, r + 1)) % ue.N] = True
    deficit = max(0.0, -float(d[near].min())) if near.any() else 0.0
    predicted = bool(np.all(d[near] >= bound[near] - 1e-12)) if near.any() else True
    far_min = float(d[~near].min()) if (~near).any() else math.inf
    out.verify_tol = verify_tol + (deficit if predicted else 0.0)
    out.meta.update({
        "construction": "mollified", "width": eps,
        "jensen_loss": max(0.0, base.min_margin - float(bound.min())),
        "bound_min": float(bound.min()), "degenerate_deficit": deficit,
        "deficit_predicted": predicted, "min_margin_off_degenerate": far_min,
    })
    out.margin_bound = bound
    if strict and (far_min < -verify_tol or not out.passed):
        i = int(np.argmin(np.where(near, np.inf, d))) if far_min < -verify_tol else int(np.argmin(d))
        raise VerificationFailed(
            f"mollified margin {d[i]:.3e} at x={x[i]:.6f}; shrink the width",
            worst_node=i, worst_margin=float(d[i]),
        )
    return out
