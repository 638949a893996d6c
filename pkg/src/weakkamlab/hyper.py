"""Fixed points, linearizations, monodromy verdicts and unstable one-forms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import null_space, schur

from .errors import BranchFold, ConfigError, EmptySlice, NotSymplectic
from .grid import DEFAULT_N, GridField, nodes, periodic_distance, wrap_signed
from .model import Covector, HamiltonianModel, branch_momenta

SPECTRAL_TOL = 1e-8


# --- fixed points -----------------------------------------------------------


class FixedPointList(list):
    """List of fixed points; ``continuum`` flags a whole circle of them."""

    continuum = False


def vector_field(model: HamiltonianModel, x, p):
    return np.array([model.H_p(x, p), -model.H_x(x, p)], dtype=float)


def linearization(model: HamiltonianModel, x: float, p: float) -> np.ndarray:
    """J Hess H at (x, p): the matrix of the linearized Hamiltonian flow."""
    hxx, hxp, hpp = (float(model.H_xx(x, p)), float(model.H_xp(x, p)), float(model.H_pp(x, p)))
    return np.array([[hxp, hpp], [-hxx, -hxp]])


def fd_linearization(model: HamiltonianModel, x: float, p: float, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the Hamiltonian vector field."""
    out = np.empty((2, 2))
    for j, (dx, dp) in enumerate(((step, 0.0), (0.0, step))):
        out[:, j] = (vector_field(model, x + dx, p + dp) - vector_field(model, x - dx, p - dp)) / (2 * step)
    return out


def find_fixed_points(model: HamiltonianModel, seeds: int = 64, tol: float = 1e-10,
                      max_iter: int = 50) -> FixedPointList:
    """Newton on (H_p, -H_x) from a coarse grid of seeds on the zero-velocity curve."""
    out = FixedPointList()
    xs = nodes(256)
    p_star = -model.P
    if np.max(np.abs(model.H_x(xs, p_star))) < 1e-14:
        warnings.warn("fixed points form a continuum (flat potential); reported as unclassified-continuum")
        out.continuum = True
        return out
    found = []
    for x0 in np.arange(seeds) / seeds:
        z = np.array([x0, p_star])
        for _ in range(max_iter):
            F = vector_field(model, z[0], z[1])
            if np.linalg.norm(F) <= tol:
                break
            A = linearization(model, z[0], z[1])
            try:
                z = z - np.linalg.solve(A, F)
            except np.linalg.LinAlgError:
                break
        if np.linalg.norm(vector_field(model, z[0], z[1])) <= tol:
            fp = Covector(z[0], z[1])
            if all(periodic_distance(fp.x, q.x) > 1e-8 or abs(fp.p - q.p) > 1e-8 for q in found):
                found.append(fp)
    out.extend(sorted(found, key=lambda q: q.x))
    return out


@dataclass
class FixedPointAnalysis:
    point: Covector
    matrix: np.ndarray
    eigenvalues: np.ndarray
    unstable: np.ndarray | None
    stable: np.ndarray | None
    hyperbolic: bool
    residual: float
    transversal: bool

    @property
    def unstable_slope(self) -> float:
        """dp/dx along the unstable direction."""
        if self.unstable is None or abs(self.unstable[0]) < 1e-300:
            raise ConfigError("unstable direction is vertical or missing")
        return float(self.unstable[1] / self.unstable[0])

    def summary(self) -> dict:
        return {"x": self.point.x, "p": self.point.p, "hyperbolic": self.hyperbolic,
                "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
                "unstable_direction": None if self.unstable is None else [float(v) for v in self.unstable],
                "residual": self.residual, "transversal_to_vertical": self.transversal}


def _direction(vec):
    v = np.real_if_close(vec, tol=1e6)
    if np.iscomplexobj(v):
        return None
    v = np.asarray(v, float)
    if abs(v[0]) > 1e-14:
        return v / v[0]
    return v / np.linalg.norm(v)


def analyze_fixed_point(model: HamiltonianModel, fp: Covector, spectral_tol: float = SPECTRAL_TOL) -> FixedPointAnalysis:
    A = linearization(model, fp.x, fp.p)
    w, V = np.linalg.eig(A)
    order = np.argsort(-w.real)
    w, V = w[order], V[:, order]
    hyperbolic = bool(np.all(np.abs(w.real) > spectral_tol))
    unstable = _direction(V[:, 0]) if hyperbolic else None
    stable = _direction(V[:, 1]) if hyperbolic else None
    transversal = bool(hyperbolic and unstable is not None and stable is not None
                       and abs(unstable[0]) > 1e-12 and abs(stable[0]) > 1e-12)
    res = float(np.linalg.norm(vector_field(model, fp.x, fp.p)))
    return FixedPointAnalysis(fp, A, w, unstable, stable, hyperbolic, res, transversal)


# --- monodromy matrices -----------------------------------------------------


def symplectic_form(n2: int, layout: str = "interleaved") -> np.ndarray:
    """J for coordinates (x1, p1, x2, p2, ...) or (x1..xn, p1..pn)."""
    if n2 % 2:
        raise ConfigError("phase space dimension must be even")
    n = n2 // 2
    if layout == "interleaved":
        return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    if layout == "split":
        return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    raise ConfigError(f"unknown layout {layout!r}")


@dataclass
class MonodromyAnalysis:
    size: int
    eigenvalues: np.ndarray
    multiplicity_one: int
    hyperbolic: bool
    W_plus: np.ndarray | None
    W_minus: np.ndarray | None
    Y: np.ndarray | None
    dH: np.ndarray | None
    residuals: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"size": self.size, "hyperbolic": self.hyperbolic, "multiplicity_one": self.multiplicity_one,
                "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
                "residuals": self.residuals}


def _rank(A, tol=1e-8):
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def analyze_monodromy(M, Y=None, dH=None, spectral_tol: float = SPECTRAL_TOL, symplectic_tol: float = 1e-8,
                      cluster_tol: float = 1e-5, layout: str = "interleaved") -> MonodromyAnalysis:
    """Hyperbolicity of a periodic orbit from its monodromy matrix.

    Hyperbolic means: eigenvalue 1 has multiplicity exactly two, every other
    eigenvalue is off the unit circle, and the phase space has a transverse
    direction at all (so a 2x2 matrix is never hyperbolic).  W+ and W- are
    the invariant subspaces of the eigenvalues outside / inside the unit
    circle, each augmented by the flow direction Y.
    """
    M = np.asarray(M, dtype=float)
    n2 = M.shape[0]
    if M.shape != (n2, n2):
        raise ConfigError("monodromy matrix must be square")
    J = symplectic_form(n2, layout)
    defect = float(np.linalg.norm(M.T @ J @ M - J))
    if defect > symplectic_tol * (1.0 + np.linalg.norm(M) ** 2):
        raise NotSymplectic(f"||M^T J M - J|| = {defect:.3e}")
    w = np.linalg.eigvals(M)
    mult = int(np.sum(np.abs(w - 1.0) <= cluster_tol))
    others = w[np.abs(w - 1.0) > cluster_tol]
    off_circle = bool(np.all(np.abs(np.abs(others) - 1.0) > spectral_tol))
    hyperbolic = mult == 2 and n2 > 2 and off_circle
    res = {"symplectic": defect}
    I = np.eye(n2)
    if Y is None:
        ns = null_space(M - I, rcond=cluster_tol)
        Y = ns[:, 0] if ns.shape[1] else None
    else:
        Y = np.asarray(Y, dtype=float)
    if dH is None:
        ns = null_space((M - I).T, rcond=cluster_tol)
        dH = ns[:, 0] if ns.shape[1] else None
    else:
        dH = np.asarray(dH, dtype=float)
    if Y is not None:
        res["flow_invariance"] = float(np.linalg.norm(M @ Y - Y))
    if dH is not None:
        res["energy_invariance"] = float(np.linalg.norm(dH @ M - dH))
    Wp = Wm = None
    if hyperbolic:
        rp = 1.0 + spectral_tol
        rm = 1.0 - spectral_tol
        _, Zp, kp = schur(M, output="real", sort=lambda re, im: re * re + im * im > rp * rp)
        _, Zm, km = schur(M, output="real", sort=lambda re, im: re * re + im * im < rm * rm)
        Eu, Es = Zp[:, :kp], Zm[:, :km]
        cols = [] if Y is None else [Y[:, None] / np.linalg.norm(Y)]
        Wp = np.hstack(cols + [Eu])
        Wm = np.hstack(cols + [Es])
        both = np.hstack([Wp, Wm])
        res["dim_sum"] = _rank(both)
        res["dim_intersection"] = _rank(Wp) + _rank(Wm) - _rank(both)
        if dH is not None:
            res["sum_in_ker_dH"] = float(max(np.abs(dH @ Wp).max(), np.abs(dH @ Wm).max()))
            res["sum_equals_ker_dH"] = bool(res["dim_sum"] == n2 - 1 and res["sum_in_ker_dH"] < 1e-8 * (1 + np.abs(M).max()))
        if Y is not None:
            # Y in both, and the intersection is one-dimensional
            res["intersection_is_RY"] = bool(res["dim_intersection"] == 1)
        res["lagrangian_plus"] = float(np.abs(Wp.T @ J @ Wp).max())
        res["lagrangian_minus"] = float(np.abs(Wm.T @ J @ Wm).max())
    return MonodromyAnalysis(n2, w, mult, hyperbolic, Wp, Wm, Y, dH, res)


def read_monodromy(path):
    """Whitespace-separated text: dimension line, matrix rows, optional Y and dH lines."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ConfigError("empty monodromy file")
    try:
        n = int(lines[0])
        rows = [[float(t) for t in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise ConfigError(f"malformed monodromy file: {exc}") from None
    if len(rows) < n or any(len(r) != n for r in rows[:n]):
        raise ConfigError(f"expected {n} rows of {n} numbers")
    extra = rows[n:]
    if any(len(r) != n for r in extra) or len(extra) > 2:
        raise ConfigError("optional Y and dH lines must have the matrix dimension")
    Y = np.array(extra[0]) if len(extra) > 0 else None
    dH = np.array(extra[1]) if len(extra) > 1 else None
    return np.array(rows[:n]), Y, dH


def orbit_monodromy(model: HamiltonianModel, x0: float, p0: float, T: float, rtol: float = 1e-11) -> np.ndarray:
    """Monodromy over time T by integrating the variational equation."""
    from scipy.integrate import solve_ivp

    def rhs(t, z):
        x, p = z[0], z[1]
        Phi = z[2:].reshape(2, 2)
        return np.concatenate((vector_field(model, x, p), (linearization(model, x, p) @ Phi).ravel()))

    z0 = np.concatenate(([x0, p0], np.eye(2).ravel()))
    sol = solve_ivp(rhs, (0.0, T), z0, method="DOP853", rtol=rtol, atol=1e-12)
    return sol.y[2:, -1].reshape(2, 2)


# --- unstable one-forms -----------------------------------------------------


@dataclass
class UnstableChart:
    """p_u on offsets s from the center; p_u(s) = -P + sign(s) side * root."""

    center: Covector
    radius: float
    s: np.ndarray
    p: np.ndarray
    alpha: float
    model: HamiltonianModel = field(repr=False)
    sides: tuple = (1.0, -1.0)
    slope: float = math.nan
    center_slope: float = math.nan
    defect: float = math.nan

    @property
    def x(self) -> np.ndarray:
        return (self.center.x + self.s) % 1.0

    def evaluate(self, s):
        """p_u at offsets s, using the branch sign fixed on each side."""
        s = np.asarray(s, dtype=float)
        x = (self.center.x + s) % 1.0
        pm, pp = branch_momenta(self.model, x, self.alpha, tol=1e-9)
        root = 0.5 * (pp - pm)
        mid = 0.5 * (pp + pm)
        sign = np.where(s >= 0, self.sides[0], self.sides[1])
        return mid + sign * root


def _branch_points(model, alpha, x):
    try:
        return branch_momenta(model, x, alpha, tol=1e-9)
    except EmptySlice as exc:
        raise BranchFold(f"level set leaves the fiber: {exc}") from None


def unstable_oneform(model: HamiltonianModel, analysis: FixedPointAnalysis, alpha: float, r: float = 0.2,
                     N: int = DEFAULT_N, offsets=None, fold_tol: float = 1e-9) -> UnstableChart:
    """Continue the branch of H(x, p) = alpha tangent to the unstable direction.

    Starting from the center, each node takes the root of the quadratic fiber
    equation closest to a linear extrapolation of the previous two.  The side
    sign must stay fixed; a switch, or the slice collapsing away from the
    center, means the branch stopped being a graph (BranchFold).
    """
    if not analysis.hyperbolic:
        raise ConfigError("unstable chart needs a hyperbolic fixed point")
    fp = analysis.point
    if abs(float(model.H(fp.x, fp.p)) - alpha) > 1e-8:
        raise ConfigError("fixed point is not on the level alpha")
    sigma = analysis.unstable_slope
    dx = 1.0 / N
    if offsets is None:
        k = int(math.floor(r * N))
        offsets = np.arange(-k, k + 1) * dx
    s = np.unique(np.concatenate((np.asarray(offsets, float), [0.0])))
    if np.max(np.abs(s)) > r + 1e-12:
        raise ConfigError("chart offsets exceed the radius")
    p = np.empty_like(s)
    i0 = int(np.flatnonzero(s == 0.0)[0])
    p[i0] = fp.p
    sides = []
    for direction in (1, -1):
        idx = range(i0 + 1, s.size) if direction > 0 else range(i0 - 1, -1, -1)
        prev_s, prev_p = 0.0, fp.p
        slope = sigma
        side = None
        for j in idx:
            pred = prev_p + slope * (s[j] - prev_s)
            pm, pp = _branch_points(model, alpha, np.array([(fp.x + s[j]) % 1.0]))
            pm, pp = float(pm[0]), float(pp[0])
            if pp - pm <= fold_tol:
                raise BranchFold(f"slice degenerates at offset {s[j]:.4f}; shrink the radius")
            take_plus = abs(pp - pred) <= abs(pm - pred)
            sgn = 1.0 if take_plus else -1.0
            if side is None:
                side = sgn
            elif sgn != side:
                raise BranchFold(f"branch switches at offset {s[j]:.4f}; shrink the radius")
            val = pp if take_plus else pm
            slope = (val - prev_p) / (s[j] - prev_s)
            p[j] = val
            prev_s, prev_p = s[j], val
        sides.append(1.0 if side is None else side)
    chart = UnstableChart(fp, float(r), s, p, float(alpha), model, (sides[0], sides[1]), sigma)
    # centred slope check on a dedicated fine stencil
    h = dx
    st = chart.evaluate(np.array([-2 * h, -h, h, 2 * h]))
    chart.center_slope = float((st[0] - 8 * st[1] + 8 * st[2] - st[3]) / (12 * h))
    chart.defect = float(np.max(np.abs(model.H(chart.x, p) - alpha)))
    return chart


@dataclass
class LocalSolution:
    """u_loc on chart offsets, anchored to 0 at the center."""

    chart: UnstableChart
    s: np.ndarray
    u: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return (self.chart.center.x + self.s) % 1.0

    def to_field(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """(node indices, values) for chart offsets that sit on grid nodes."""
        idx = np.rint(self.x * N).astype(np.int64) % N
        on = np.abs(wrap_signed(self.x - idx / N)) < 1e-9 / N
        return idx[on], self.u[on]


_GAUSS = np.polynomial.legendre.leggauss(4)


def local_solution(chart: UnstableChart) -> LocalSolution:
    """Primitive of p_u by 4-point Gauss-Legendre on every chart cell."""
    s = chart.s
    i0 = int(np.flatnonzero(s == 0.0)[0])
    t, wts = _GAUSS
    a, b = s[:-1], s[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * t[None, :]
    vals = chart.evaluate(pts)
    cell = (vals * wts[None, :]).sum(axis=1) * half
    u = np.concatenate(([0.0], np.cumsum(cell)))
    u -= u[i0]
    return LocalSolution(chart, s.copy(), u)
