"""Tonelli Hamiltonians on the cotangent bundle of the circle.

The model class is fiber-quadratic,

    H(x, p) = 1/2 a(x) (p + P)^2 + V(x),

with ``a`` and ``V`` finite trigonometric polynomials (period 1).  Extra
potential terms (objects with ``value``, ``d1`` and ``d2``) can be stacked on
top of ``V``; this is how perturbed models H + V are represented.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptySlice, MaximizationDiverged, NonConvexFiber

TWO_PI = 2.0 * math.pi
KINDS = ("mechanical", "pendulum", "custom-trig")


@dataclass(frozen=True)
class TrigSeries:
    """c0 + sum_k cos_k cos(2 pi k x) + sin_k sin(2 pi k x)."""

    const: float = 0.0
    cos: dict = field(default_factory=dict)
    sin: dict = field(default_factory=dict)

    def _terms(self):
        for k, c in sorted(self.cos.items()):
            if c:
                yield int(k), float(c), 0.0
        for k, s in sorted(self.sin.items()):
            if s:
                yield int(k), 0.0, float(s)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, float(self.const))
        for k, c, s in self._terms():
            w = TWO_PI * k * x
            out = out + c * np.cos(w) + s * np.sin(w)
        return out

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for k, c, s in self._terms():
            w = TWO_PI * k
            out = out + w * (-c * np.sin(w * x) + s * np.cos(w * x))
        return out

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for k, c, s in self._terms():
            w = TWO_PI * k
            out = out - w * w * (c * np.cos(w * x) + s * np.sin(w * x))
        return out

    def shifted(self, k: float) -> "TrigSeries":
        return replace(self, const=self.const + k)

    def coefficients(self) -> dict:
        out = {}
        if self.const:
            out["cos.0"] = float(self.const)
        for k, c in sorted(self.cos.items()):
            if c and int(k) > 0:
                out[f"cos.{int(k)}"] = float(c)
        for k, s in sorted(self.sin.items()):
            if s:
                out[f"sin.{int(k)}"] = float(s)
        return out


@dataclass(frozen=True)
class Covector:
    x: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class HamiltonianModel:
    """Fiber-quadratic Tonelli Hamiltonian.

    Evaluators accept scalars or arrays and broadcast ``x`` against ``p``.
    """

    kind: str
    a: TrigSeries
    V: TrigSeries
    P: float = 0.0
    extra: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "P", float(self.P))

    # coefficient profiles
    def kinetic(self, x, deriv: int = 0):
        return (self.a.value, self.a.d1, self.a.d2)[deriv](x)

    def potential(self, x, deriv: int = 0):
        out = (self.V.value, self.V.d1, self.V.d2)[deriv](x)
        for term in self.extra:
            out = out + (term.value, term.d1, term.d2)[deriv](x)
        return out

    # Hamiltonian and derivatives
    def H(self, x, p):
        return 0.5 * self.kinetic(x) * (p + self.P) ** 2 + self.potential(x)

    def H_p(self, x, p):
        return self.kinetic(x) * (p + self.P)

    def H_pp(self, x, p):
        return self.kinetic(x) + 0.0 * np.asarray(p, dtype=float)

    def H_x(self, x, p):
        return 0.5 * self.kinetic(x, 1) * (p + self.P) ** 2 + self.potential(x, 1)

    def H_xx(self, x, p):
        return 0.5 * self.kinetic(x, 2) * (p + self.P) ** 2 + self.potential(x, 2)

    def H_xp(self, x, p):
        return self.kinetic(x, 1) * (p + self.P)

    # Lagrangian (closed form for quadratic fibers)
    def L(self, x, v):
        return 0.5 * v**2 / self.kinetic(x) - self.P * v - self.potential(x)

    def L_v(self, x, v):
        return v / self.kinetic(x) - self.P

    def L_x(self, x, v):
        a = self.kinetic(x)
        return -0.5 * self.kinetic(x, 1) * v**2 / a**2 - self.potential(x, 1)

    def L_xx(self, x, v):
        a = self.kinetic(x)
        a1 = self.kinetic(x, 1)
        return (a1**2 / a**3 - 0.5 * self.kinetic(x, 2) / a**2) * v**2 - self.potential(x, 2)

    def L_xv(self, x, v):
        return -self.kinetic(x, 1) * v / self.kinetic(x) ** 2

    def L_vv(self, x, v):
        return 1.0 / self.kinetic(x) + 0.0 * np.asarray(v, dtype=float)

    def with_potential(self, term) -> "HamiltonianModel":
        return replace(self, extra=self.extra + (term,))

    def shifted(self, k: float) -> "HamiltonianModel":
        return replace(self, V=self.V.shifted(k))

    def describe(self) -> dict:
        out = {"kind": self.kind, "P": self.P}
        out.update({f"a.{k}": v for k, v in self.a.coefficients().items()})
        out.update({f"V.{k}": v for k, v in self.V.coefficients().items()})
        if self.extra:
            out["extra_terms"] = [getattr(t, "label", type(t).__name__) for t in self.extra]
        return out


def pendulum(P: float = 0.0) -> HamiltonianModel:
    """H_P(x, p) = (p + P)^2 / 2 - sin^2(pi x) / 2."""
    # -sin^2(pi x)/2 = -1/4 + cos(2 pi x)/4
    return HamiltonianModel("pendulum", TrigSeries(1.0), TrigSeries(-0.25, {1: 0.25}), P)


def mechanical(V: TrigSeries | None = None, a: TrigSeries | None = None) -> HamiltonianModel:
    """H = a(x) p^2 / 2 + V(x); defaults to a = 1, V = cos(2 pi x)."""
    V = TrigSeries(0.0, {1: 1.0}) if V is None else V
    return HamiltonianModel("mechanical", a or TrigSeries(1.0), V, 0.0)


def custom(a: TrigSeries, V: TrigSeries, P: float = 0.0) -> HamiltonianModel:
    return HamiltonianModel("custom-trig", a, V, P)


_KEY = re.compile(r"^(a|V)\.(cos|sin)\.(\d+)$")


def model_from_mapping(entries: dict) -> HamiltonianModel:
    """Build a model from ``key=value`` entries (the model-file grammar)."""
    entries = dict(entries)
    kind = str(entries.pop("kind", "custom-trig")).strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    try:
        P = float(entries.pop("P", 0.0))
    except ValueError as exc:
        raise ConfigError(f"bad P value: {exc}") from None
    coeffs = {"a": [0.0, {}, {}], "V": [0.0, {}, {}]}
    seen_a = False
    for key, raw in entries.items():
        m = _KEY.match(key)
        if not m:
            raise ConfigError(f"unknown model key {key!r}")
        name, trig, k = m.group(1), m.group(2), int(m.group(3))
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"non-numeric value for {key}: {raw!r}") from None
        if not math.isfinite(val):
            raise ConfigError(f"non-finite value for {key}")
        if trig == "sin" and k == 0:
            raise ConfigError(f"{key}: sin.0 is not a valid term")
        seen_a = seen_a or name == "a"
        slot = coeffs[name]
        if trig == "cos" and k == 0:
            slot[0] += val
        else:
            slot[1 if trig == "cos" else 2][k] = val
    if kind == "pendulum":
        if seen_a or coeffs["V"][0] or coeffs["V"][1] or coeffs["V"][2]:
            raise ConfigError("pendulum models only accept P")
        return pendulum(P)
    if kind == "mechanical" and P != 0.0:
        raise ConfigError("mechanical models have P = 0; use kind=custom-trig for a shift")
    a = TrigSeries(coeffs["a"][0], coeffs["a"][1], coeffs["a"][2]) if seen_a else TrigSeries(1.0)
    V = TrigSeries(coeffs["V"][0], coeffs["V"][1], coeffs["V"][2])
    return HamiltonianModel(kind, a, V, P)


def model_entries(text: str) -> dict:
    """``key=value`` lines of a model file; ``#`` starts a comment."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def parse_model_text(text: str) -> HamiltonianModel:
    return model_from_mapping(model_entries(text))


def load_model(path) -> HamiltonianModel:
    return parse_model_text(Path(path).read_text())


def model_to_text(model: HamiltonianModel) -> str:
    if model.extra:
        raise ConfigError("perturbed models have no file representation")
    lines = [f"kind={model.kind}"]
    if model.kind != "mechanical":
        lines.append(f"P={model.P!r}")
    if model.kind != "pendulum":
        lines += [f"a.{k}={v!r}" for k, v in model.a.coefficients().items()]
        lines += [f"V.{k}={v!r}" for k, v in model.V.coefficients().items()]
    return "\n".join(lines) + "\n"


# --- fiberwise convex analysis -------------------------------------------


def maximize_concave(f, df, d2f, s, p0=0.0, tol=1e-13, max_iter=200):
    """Return (argmax, max) of ``s * p - f(p)`` for convex superlinear ``f``.

    Vectorized safeguarded Newton: a bracket [lo, hi] with f'(lo) <= s <= f'(hi)
    is grown by doubling, then Newton steps that leave the bracket are replaced
    by bisection.
    """
    s = np.asarray(s, dtype=float)
    p = np.broadcast_to(np.asarray(p0, dtype=float), s.shape).copy()
    lo = p - 1.0
    hi = p + 1.0
    for _ in range(max_iter):
        bad_lo = df(lo) > s
        bad_hi = df(hi) < s
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        if np.any(np.abs(lo) > 1e100) or np.any(np.abs(hi) > 1e100):
            raise MaximizationDiverged("bracket growth exceeded 1e100; fiber not superlinear?")
    else:
        raise MaximizationDiverged("could not bracket the maximizer")
    p = np.clip(p, lo, hi)
    for _ in range(max_iter):
        g = s - df(p)
        lo = np.where(g > 0, p, lo)
        hi = np.where(g < 0, p, hi)
        curv = d2f(p)
        step = np.where(curv > 0, g / np.where(curv > 0, curv, 1.0), 0.0)
        cand = p + step
        outside = (cand <= lo) | (cand >= hi) | (curv <= 0)
        cand = np.where(outside, 0.5 * (lo + hi), cand)
        done = np.abs(cand - p) <= tol * (1.0 + np.abs(p))
        p = cand
        if np.all(done):
            break
    else:
        raise MaximizationDiverged("Newton budget exhausted")
    return p, s * p - f(p)


def legendre(model: HamiltonianModel, x, v, method: str = "closed"):
    """L(x, v) = max_p (p v - H(x, p))."""
    if method == "closed":
        return model.L(x, v)
    if method != "numeric":
        raise ConfigError(f"unknown method {method!r}")
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    _, val = maximize_concave(
        lambda p: model.H(x, p), lambda p: model.H_p(x, p), lambda p: model.H_pp(x, p), v, -model.P
    )
    return val


def hamiltonian_from_lagrangian(model: HamiltonianModel, x, p):
    """Numerical inverse transform max_v (p v - L(x, v)); closes the involution."""
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    _, val = maximize_concave(
        lambda v: model.L(x, v), lambda v: model.L_v(x, v), lambda v: model.L_vv(x, v), p, 0.0
    )
    return val


def fiber_minimum(model: HamiltonianModel, x, method: str = "closed"):
    """Return (p*, c_min) with c_min(x) = min_p H(x, p)."""
    x = np.asarray(x, dtype=float)
    if method == "closed":
        return np.full(x.shape, -model.P), model.potential(x)
    pstar, val = maximize_concave(
        lambda p: model.H(x, p), lambda p: model.H_p(x, p), lambda p: model.H_pp(x, p),
        np.zeros(x.shape), 0.0,
    )
    return pstar, -val


def branch_momenta(model: HamiltonianModel, x, c, tol: float = 1e-12):
    """Endpoints (p-, p+) of the convex slice {p : H(x, p) <= c}."""
    x = np.asarray(x, dtype=float)
    gap = c - model.potential(x)
    if np.any(gap < -tol):
        i = int(np.argmin(gap))
        xi = float(np.ravel(x)[i]) if x.ndim else float(x)
        raise EmptySlice(f"level {c} below fiber minimum at x={xi} (gap {np.min(gap):.3e})")
    root = np.sqrt(2.0 * np.maximum(gap, 0.0) / model.kinetic(x))
    return -model.P - root, -model.P + root


@dataclass
class ConvexityReport:
    min_hessian: float
    at: tuple
    floor: float
    passed: bool


def convexity_check(model: HamiltonianModel, floor: float = 1e-3, nx: int = 64, np_: int = 64,
                    p_range=(-4.0, 4.0)) -> ConvexityReport:
    xs = np.arange(nx) / nx
    ps = np.linspace(*p_range, np_)
    X, Pm = np.meshgrid(xs, ps, indexing="ij")
    hess = model.H_pp(X, Pm)
    i = np.unravel_index(int(np.argmin(hess)), hess.shape)
    worst = float(hess[i])
    report = ConvexityReport(worst, (float(X[i]), float(Pm[i])), floor, worst >= floor)
    if not report.passed:
        raise NonConvexFiber(f"d2H/dp2 = {worst:.4g} < {floor} at x={X[i]:.4f}")
    return report
