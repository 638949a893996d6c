"""Discrete Lax-Oleinik semigroup, weak KAM solutions and calibrated curves.

One step of the scheme is the inf-convolution

    (T u)(x) = min_y [ u(y) + h L((x + y)/2, (x - y)/h) ] + c h

over the displacements d = x - y in a window |d| <= v_max h.  With the
default ``interpolation="linear"`` the field ``u`` is extended linearly
between nodes and the minimum over y is taken exactly on every cell that can
beat the best node; the resulting operator is monotone, commutes with
constants and is sup-norm non-expansive.  ``interpolation="parabolic"``
refines the best node with a three-point parabola instead (more accurate,
not monotone on rough data).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DidNotConverge, WindowTooSmall
from .grid import DEFAULT_N, GridField, check_resolution, nodes, periodic_distance
from .model import HamiltonianModel, branch_momenta

log = logging.getLogger(__name__)

DEFAULT_H = 0.01


def default_vmax(model: HamiltonianModel, c: float, N: int = 256) -> float:
    x = nodes(N)
    level = max(c, float(np.max(model.potential(x)))) + 1.0
    pm, pp = branch_momenta(model, x, level)
    speed = np.maximum(np.abs(model.H_p(x, pm)), np.abs(model.H_p(x, pp)))
    return 1.0 + float(np.max(speed))


class LaxOleinik:
    """Precomputed one-step operator for a model, grid, time step and level.

    Tables are laid out (target, displacement) with displacements decreasing
    along a row.  On each cell the action h L is replaced by its cubic Hermite
    interpolant from node values and d-derivatives, so the minimum of
    ``u_lin(y) + action`` over a cell is found in closed form.  Any fixed
    action kernel gives a monotone, constant-commuting, non-expansive operator,
    so these properties hold exactly; the Hermite error is O(dx^4).
    """

    def __init__(self, model: HamiltonianModel, N: int = DEFAULT_N, h: float = DEFAULT_H,
                 c: float = 0.0, v_max: float | None = None, interpolation: str = "linear"):
        if h <= 0:
            raise ConfigError("time step must be positive")
        if interpolation not in ("linear", "parabolic", "none"):
            raise ConfigError(f"unknown interpolation {interpolation!r}")
        self.model = model
        self.N = check_resolution(N)
        self.h = float(h)
        self.c = float(c)
        self.interpolation = interpolation
        self.v_max = default_vmax(model, c) if v_max is None else float(v_max)
        self.K = int(math.ceil(self.v_max * self.h * self.N)) + 1
        self.dx = 1.0 / self.N
        x = nodes(self.N)
        # column r <-> source node j = i - K + r, displacement d = (K - r) dx
        cols = np.arange(2 * self.K + 1)
        self.disp = (self.K - cols) * self.dx
        self.src = (np.arange(self.N)[:, None] - self.K + cols[None, :]) % self.N
        D = np.broadcast_to(self.disp[None, :], self.src.shape)
        X = np.broadcast_to(x[:, None], self.src.shape)
        self.Ltab = self.action(X, D)
        self.Gtab = self.action_d(X, D)
        self.curv = 1.25 * float(np.max(self.action_dd(X, D))) + 1e-12

    # discrete Lagrangian and its derivatives in the displacement d at fixed x
    def action(self, x, d):
        m = x - 0.5 * d
        return self.h * self.model.L(m, d / self.h)

    def action_d(self, x, d):
        m = x - 0.5 * d
        v = d / self.h
        return -0.5 * self.h * self.model.L_x(m, v) + self.model.L_v(m, v)

    def action_dd(self, x, d):
        m = x - 0.5 * d
        v = d / self.h
        M = self.model
        return 0.25 * self.h * M.L_xx(m, v) - M.L_xv(m, v) + M.L_vv(m, v) / self.h

    def momentum(self, x, d):
        """d/dx of the one-step action at fixed source: the outgoing momentum."""
        m = x - 0.5 * d
        v = d / self.h
        return 0.5 * self.h * self.model.L_x(m, v) + self.model.L_v(m, v)

    def _tables(self, x):
        if x is None:
            D = np.broadcast_to(self.disp[None, :], self.src.shape)
            return self.src, D, self.Ltab, self.Gtab, nodes(self.N)
        x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
        j0 = np.floor(x * self.N).astype(np.int64)
        offs = np.arange(-self.K - 1, self.K + 2)
        J = j0[:, None] + offs[None, :]
        D = x[:, None] - J * self.dx
        X = np.broadcast_to(x[:, None], D.shape)
        return J % self.N, D, self.action(X, D), self.action_d(X, D), x

    def minimize(self, u: np.ndarray, x=None):
        """Minimize u(y) + h L over sources for targets ``x`` (default: all nodes).

        Returns (value, displacement, momentum) arrays, without the c h shift.
        """
        src, D, Lt, Gt, xt = self._tables(x)
        U = u[src]
        F = U + Lt
        M, R = F.shape
        rows = np.arange(M)
        r = np.argmin(F, axis=1)
        fmin = F[rows, r]
        ties = np.count_nonzero(F == fmin[:, None], axis=1) > 1
        if np.any(ties):
            # ties go to the smallest |displacement|
            t = np.flatnonzero(ties)
            Ft = F[t]
            r[t] = np.argmin(np.where(Ft == fmin[t, None], np.abs(D[t]), np.inf), axis=1)
        best, dbest = fmin.copy(), D[rows, r].copy()
        edge = (r == 0) | (r == R - 1)
        if self.interpolation == "parabolic":
            rr = np.clip(r, 1, R - 2)
            fm, f0, fp = F[rows, rr - 1], F[rows, rr], F[rows, rr + 1]
            den = fm - 2.0 * f0 + fp
            ok = (den > 0) & ~edge
            t = np.where(ok, 0.5 * (fm - fp) / np.where(ok, den, 1.0), 0.0)
            best = np.where(ok, f0 - 0.25 * (fm - fp) * t, best)
            # displacement decreases along a row
            dbest = np.where(ok, D[rows, rr] - t * self.dx, dbest)
        elif self.interpolation == "linear":
            lb = np.minimum(F[:, :-1], F[:, 1:])
            sc, sr = np.nonzero(lb < (fmin + 0.125 * self.curv * self.dx**2)[:, None])
            if sc.size:
                th, val = _cell_minimum(F[sc, sr], F[sc, sr + 1], Gt[sc, sr], Gt[sc, sr + 1],
                                        U[sc, sr + 1] - U[sc, sr], D[sc, sr + 1] - D[sc, sr])
                seg = np.full(M, np.inf)
                np.minimum.at(seg, sc, val)
                win = val <= seg[sc]
                better = seg < best
                best = np.where(better, seg, best)
                dsel = np.full(M, np.nan)
                dsel[sc[win]] = (D[sc, sr] + th * (D[sc, sr + 1] - D[sc, sr]))[win]
                dbest = np.where(better, dsel, dbest)
                touched = np.zeros(M, bool)
                hit = win & (((sr == 0) & (th == 0.0)) | ((sr + 1 == R - 1) & (th == 1.0)))
                touched[sc[hit]] = True
                edge = (edge & ~better) | (touched & better)
        if np.any(edge):
            i = int(np.flatnonzero(edge)[0])
            raise WindowTooSmall(
                f"minimizer on the window boundary at x={xt[i]:.6f} "
                f"(v_max={self.v_max:.3f}); enlarge v_max"
            )
        return best, dbest, self.momentum(xt, dbest)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        val, _, _ = self.minimize(u)
        return val + self.c * self.h


def _cell_minimum(f0, f1, g0, g1, du, dd):
    """Exact minimum over theta in [0, 1] of the cubic Hermite cell interpolant.

    f0, f1 are node values of u + action, g0, g1 the action d-derivatives,
    du the increment of u across the cell and dd the displacement step.
    """
    # cubic in theta: f0 + b1 t + b2 t^2 + b3 t^3, action part Hermite, u part linear
    m0 = g0 * dd + du
    m1 = g1 * dd + du
    df = f1 - f0
    b1 = m0
    b2 = 3.0 * df - 2.0 * m0 - m1
    b3 = m0 + m1 - 2.0 * df
    # stationary points of b1 + 2 b2 t + 3 b3 t^2
    A, B, C = 3.0 * b3, 2.0 * b2, b1
    disc = np.maximum(B * B - 4.0 * A * C, 0.0)
    sq = np.sqrt(disc)
    q = -0.5 * (B + np.copysign(sq, B))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(A != 0.0, q / A, -C / np.where(B != 0.0, B, np.inf))
        t2 = np.where(q != 0.0, C / q, t1)
    cand = [np.zeros_like(f0), np.ones_like(f0), np.clip(t1, 0.0, 1.0), np.clip(t2, 0.0, 1.0)]
    cand = [np.where(np.isfinite(t), t, 0.0) for t in cand]
    vals = [f0 + t * (b1 + t * (b2 + t * b3)) for t in cand]
    vals[1] = f1
    th, val = cand[0], vals[0]
    for t, v in zip(cand[1:], vals[1:]):
        take = v < val
        th = np.where(take, t, th)
        val = np.where(take, v, val)
    return th, val


def lax_oleinik_step(model: HamiltonianModel, u: GridField, h: float = DEFAULT_H, c: float = 0.0,
                     **opts) -> GridField:
    op = LaxOleinik(model, u.N, h, c, **opts)
    return GridField(op(u.values))


@dataclass
class WeakKamSolution:
    c: float
    u: GridField
    du: GridField
    residual: float
    drift: float
    iterations: int
    converged: bool
    h: float
    increments: np.ndarray = field(repr=False, default=None)
    displacement: np.ndarray = field(repr=False, default=None)
    v_max: float = 0.0
    interpolation: str = "linear"

    @property
    def N(self) -> int:
        return self.u.N

    def summary(self) -> dict:
        return {
            "level": self.c, "residual": self.residual, "drift": self.drift,
            "iterations": self.iterations, "converged": self.converged, "h": self.h,
            "N": self.N, "v_max": self.v_max, "interpolation": self.interpolation,
        }


def weak_kam_solve(model: HamiltonianModel, c: float, N: int = DEFAULT_N, h: float = DEFAULT_H,
                   tol: float = 1e-11, max_iter: int = 20000, drift_window: int = 100,
                   u0: GridField | None = None, interpolation: str = "linear",
                   v_max: float | None = None, require_convergence: bool = True) -> WeakKamSolution:
    """Iterate u <- T u - (T u)(0) until the increment T u - u is flat.

    The residual is the oscillation max(Tu - u) - min(Tu - u); once it is below
    ``tol`` the normalized field is a discrete weak KAM solution and the drift
    (mean increment / h) estimates c - alpha(H).
    """
    cmin = float(np.max(model.potential(nodes(256))))
    lo_c = float(np.min(model.potential(nodes(256))))
    if not (lo_c - 1.0 <= c <= cmin + 10.0):
        raise ConfigError(f"level {c} outside the sanity bracket [{lo_c - 1}, {cmin + 10}]")
    N = check_resolution(N)
    while True:
        op = LaxOleinik(model, N, h, c, v_max=v_max, interpolation=interpolation)
        try:
            return _iterate(op, u0, tol, max_iter, drift_window, require_convergence)
        except WindowTooSmall:
            v_max = 1.5 * op.v_max
            log.info("enlarging Lax-Oleinik window to v_max=%.3f", v_max)
            if v_max > 1e3:
                raise


def _iterate(op: LaxOleinik, u0, tol, max_iter, drift_window, require_convergence):
    N, h = op.N, op.h
    u = np.zeros(N) if u0 is None else np.asarray(u0.values, float) - u0.values[0]
    means = np.empty(max_iter)
    residual = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        val, disp, mom = op.minimize(u)
        new = val + op.c * h
        inc = new - u
        means[it - 1] = inc.mean()
        residual = float(inc.max() - inc.min())
        u = new - new[0]
        if residual <= tol:
            converged = True
            break
    means = means[:it]
    drift = float(np.mean(means[-drift_window:]) / h)
    sol = WeakKamSolution(op.c, GridField(u), GridField(mom), residual, drift, it, converged, h,
                          means, disp, op.v_max, op.interpolation)
    if not converged and require_convergence:
        raise DidNotConverge(
            f"Lax-Oleinik residual {residual:.3e} > {tol:.1e} after {it} sweeps", partial=sol
        )
    return sol


@dataclass
class DiscreteCurve:
    """Samples of a curve on the circle; ``lift`` is the unwrapped position."""

    h: float
    t: np.ndarray
    x: np.ndarray
    lift: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def displacements(self) -> np.ndarray:
        return np.diff(self.lift)

    @classmethod
    def from_lift(cls, lift, h: float, t0: float = 0.0) -> "DiscreteCurve":
        lift = np.asarray(lift, dtype=float)
        t = t0 + h * np.arange(lift.size)
        return cls(h, t, lift % 1.0, lift)


def interpolate_linear(u: GridField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float) % 1.0
    s = x * u.N
    j = np.floor(s).astype(np.int64)
    th = s - j
    v = u.values
    return (1.0 - th) * v[j % u.N] + th * v[(j + 1) % u.N]


def backward_curve(model: HamiltonianModel, sol: WeakKamSolution, x0: float, T: float) -> DiscreteCurve:
    """Chain one-step minimizers backward from x0 for ceil(T/h) steps.

    The samples are returned in forward time: t runs from -T to 0 and the last
    sample is x0.
    """
    if not sol.converged:
        raise ConfigError("backward_curve needs a converged weak KAM solution")
    op = LaxOleinik(model, sol.N, sol.h, sol.c, v_max=sol.v_max, interpolation=sol.interpolation)
    n = int(math.ceil(T / sol.h - 1e-12))
    lift = np.empty(n + 1)
    lift[n] = float(x0)
    u = sol.u.values
    for j in range(n, 0, -1):
        _, d, _ = op.minimize(u, np.array([lift[j] % 1.0]))
        lift[j - 1] = lift[j] - float(d[0])
    return DiscreteCurve.from_lift(lift, sol.h, t0=-n * sol.h)


def _simpson_action(model: HamiltonianModel, curve: DiscreteCurve) -> float:
    a, b = curve.lift[:-1], curve.lift[1:]
    v = (b - a) / np.diff(curve.t)
    mid = 0.5 * (a + b)
    dt = np.diff(curve.t)
    return float(np.sum(dt * (model.L(a, v) + 4.0 * model.L(mid, v) + model.L(b, v)) / 6.0))


def calibration_defect(model: HamiltonianModel, u: GridField, curve: DiscreteCurve, c: float) -> float:
    """int (c + L(g, g')) dt - [u(g(T)) - u(g(S))] along the piecewise-linear curve.

    Non-negative (up to quadrature error) whenever u is a sub-solution at level
    c; zero exactly along calibrated curves.
    """
    action = _simpson_action(model, curve) + c * curve.duration
    ends = interpolate_linear(u, np.array([curve.x[-1], curve.x[0]]))
    return action - float(ends[0] - ends[1])


def curve_distance_to(curve: DiscreteCurve, point: float) -> np.ndarray:
    return periodic_distance(curve.x, point)
