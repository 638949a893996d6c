"""Uniform periodic grids on [0, 1) and the discrete calculus used everywhere."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter1d

from .errors import ConfigError

DEFAULT_N = 2048


def check_resolution(N: int) -> int:
    N = int(N)
    if N < 16 or N & (N - 1):
        raise ConfigError(f"grid resolution must be a power of two >= 16, got {N}")
    return N


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples v_i = f(i / N) of a 1-periodic function."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ConfigError("GridField values must be one-dimensional")
        check_resolution(v.size)
        if not np.all(np.isfinite(v)):
            raise ConfigError("GridField values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, N: int = DEFAULT_N) -> "GridField":
        return cls(f(nodes(N)))

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @property
    def x(self) -> np.ndarray:
        return nodes(self.N)

    def __len__(self):
        return self.N

    def __add__(self, other):
        other = other.values if isinstance(other, GridField) else other
        return GridField(self.values + other)

    def __sub__(self, other):
        other = other.values if isinstance(other, GridField) else other
        return GridField(self.values - other)


def nodes(N: int) -> np.ndarray:
    return np.arange(N) / N


def gradient(field: GridField, method: str = "central") -> GridField:
    """Discrete derivative: second-order central differences or spectral."""
    u = field.values
    if method == "central":
        return GridField((np.roll(u, -1) - np.roll(u, 1)) * (0.5 * field.N))
    if method == "spectral":
        return GridField(spectral_derivative(u, 1))
    raise ConfigError(f"unknown gradient method {method!r}")


def spectral_derivative(u: np.ndarray, order: int = 1) -> np.ndarray:
    N = u.size
    k = np.fft.rfftfreq(N, 1.0 / N)
    mult = (2j * math.pi * k) ** order
    if order % 2:
        mult[-1] = 0.0  # Nyquist mode of an odd derivative is not representable
    return np.fft.irfft(np.fft.rfft(u) * mult, n=N)


@dataclass
class SlopeReport:
    max_slope: float
    argmax: int
    jump_nodes: np.ndarray

    @property
    def flagged(self) -> bool:
        return self.jump_nodes.size > 0


def slope_report(field: GridField, jump_factor: float = 20.0) -> SlopeReport:
    """Largest one-sided slope, plus nodes whose increment dwarfs the median."""
    du = np.roll(field.values, -1) - field.values
    slopes = np.abs(du) * field.N
    med = np.median(np.abs(du))
    jumps = np.flatnonzero(np.abs(du) > jump_factor * max(med, 1e-300))
    i = int(np.argmax(slopes))
    return SlopeReport(float(slopes[i]), i, jumps)


def integrate(field: GridField) -> float:
    """Periodic trapezoidal rule over [0, 1), i.e. the mean of the samples."""
    return float(np.mean(field.values))


def primitive(q: GridField, tol: float = 1e-9) -> GridField:
    """Periodic primitive by cumulative trapezoid, anchored at u(0) = 0."""
    vals = q.values
    mean = float(np.mean(vals))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if abs(mean) > tol * scale:
        raise ConfigError(f"slope field has mean {mean:.3e}; no periodic primitive")
    incr = 0.5 * (vals + np.roll(vals, -1)) / q.N
    u = np.concatenate(([0.0], np.cumsum(incr[:-1])))
    return GridField(u)


def central_primitive(q: GridField, tol: float = 1e-9) -> GridField:
    """Periodic u whose central difference equals q (all modes but Nyquist).

    Solved in Fourier space: the central difference has symbol
    i N sin(2 pi k / N).  For smooth q this is the exact inverse of the
    certification gradient, so margins are evaluated on q itself.
    """
    vals = q.values
    mean = float(np.mean(vals))
    if abs(mean) > tol * max(1.0, float(np.max(np.abs(vals)))):
        raise ConfigError(f"slope field has mean {mean:.3e}; no periodic primitive")
    N = q.N
    k = np.arange(N // 2 + 1)
    sym = 1j * N * np.sin(2.0 * math.pi * k / N)
    coef = np.fft.rfft(vals)
    out = np.zeros_like(coef)
    ok = np.abs(sym) > 1e-9
    out[ok] = coef[ok] / sym[ok]
    u = np.fft.irfft(out, n=N)
    return GridField(u - u[0])


def fd_derivative(u: np.ndarray, order: int, N: int | None = None) -> np.ndarray:
    """Central finite-difference derivative of order 1..4 (second-order stencils)."""
    N = u.size if N is None else N
    r = lambda k: np.roll(u, -k)
    if order == 1:
        out = (r(1) - r(-1)) * 0.5
    elif order == 2:
        out = r(1) - 2 * u + r(-1)
    elif order == 3:
        out = (r(2) - 2 * r(1) + 2 * r(-1) - r(-2)) * 0.5
    elif order == 4:
        out = r(2) - 4 * r(1) + 6 * u - 4 * r(-1) + r(-2)
    else:
        raise ConfigError("fd_derivative supports orders 1..4")
    return out * float(N) ** order


# --- bump kernels -----------------------------------------------------------


def bump(t, deriv: int = 0):
    """exp(-1 / (1 - t^2)) on |t| < 1 and its first two derivatives."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    ti = np.where(inside, t, 0.0)
    s = 1.0 - ti * ti
    rho = np.where(inside, np.exp(-1.0 / s), 0.0)
    if deriv == 0:
        return rho
    g1 = -2.0 * ti / s**2
    if deriv == 1:
        return rho * g1
    g2 = -2.0 / s**2 - 8.0 * ti * ti / s**3
    if deriv == 2:
        return rho * (g1 * g1 + g2)
    raise ConfigError("bump derivatives up to order 2")


_STEP_TABLE = None


def _step_table():
    global _STEP_TABLE
    if _STEP_TABLE is None:
        from scipy.integrate import cumulative_simpson
        from scipy.interpolate import CubicHermiteSpline

        t = np.linspace(-1.0, 1.0, 8193)
        F = cumulative_simpson(bump(t), x=t, initial=0.0)
        total = F[-1]
        _STEP_TABLE = (CubicHermiteSpline(t, F / total, bump(t) / total), total)
    return _STEP_TABLE


def smooth_step(t, deriv: int = 0):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from the bump profile.

    The normalized primitive of the bump is tabulated once and evaluated by
    cubic Hermite interpolation (the derivative is known exactly), so the
    interpolation error is far below the grid-level noise that finite
    differences of order four would amplify.
    """
    spline, total = _step_table()
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 * t - 1.0, -1.0, 1.0)
    if deriv == 0:
        return np.clip(spline(s), 0.0, 1.0)
    if deriv == 1:
        return 2.0 * bump(s) / total
    if deriv == 2:
        return 4.0 * bump(s, 1) / total
    raise ConfigError("smooth_step derivatives up to order 2")


def kernel_weights(width: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized samples of the bump kernel of support radius ``width``."""
    M = int(math.floor(width * N))
    offsets = np.arange(-M, M + 1)
    w = bump(offsets / (width * N))
    keep = w > 0
    offsets, w = offsets[keep], w[keep]
    if w.size == 0:
        return np.array([0]), np.array([1.0])
    return offsets, w / w.sum()


def mollify(field: GridField, width: float) -> GridField:
    """Periodic convolution with the compactly supported bump of radius ``width``.

    Evaluated directly (no FFT) so that compact support is exact; the kernel is
    applied to ``u - u[0]`` so constants pass through untouched.
    """
    if not 0.0 < width < 0.25:
        raise ConfigError(f"mollification width must lie in (0, 1/4), got {width}")
    u = field.values
    base = u[0]
    dev = u - base
    offsets, w = kernel_weights(width, field.N)
    out = np.zeros_like(u)
    for k, wk in zip(offsets, w):
        out += wk * np.roll(dev, k)
    return GridField(base + out)


def erode(field: GridField, radius: float) -> GridField:
    """Morphological erosion: running minimum over |y - x| <= radius."""
    n = int(math.ceil(radius * field.N))
    return GridField(minimum_filter1d(field.values, size=2 * n + 1, mode="wrap"))


def periodic_distance(x, y):
    d = np.abs((np.asarray(x, float) - np.asarray(y, float)) % 1.0)
    return np.minimum(d, 1.0 - d)


def wrap_signed(x):
    """Representative of x mod 1 in [-1/2, 1/2)."""
    return (np.asarray(x, float) + 0.5) % 1.0 - 0.5


def set_distance(A, B) -> float:
    """Hausdorff distance between finite point sets on the circle."""
    A = np.atleast_1d(np.asarray(A, float))
    B = np.atleast_1d(np.asarray(B, float))
    if A.size == 0 and B.size == 0:
        return 0.0
    if A.size == 0 or B.size == 0:
        return math.inf
    D = periodic_distance(A[:, None], B[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


# --- smooth evaluators of grid data ----------------------------------------


class TrigInterpolant:
    """Band-limited periodic interpolant of grid samples (value, d1, d2)."""

    label = "trig-interpolant"

    def __init__(self, field: GridField):
        self.N = field.N
        self.coef = np.fft.rfft(field.values) / field.N
        self.k = np.arange(self.coef.size)
        w = np.full(self.coef.size, 2.0)
        w[0] = 1.0
        if self.N % 2 == 0:
            w[-1] = 1.0
        self.w = w

    def _eval(self, x, deriv):
        x = np.asarray(x, dtype=float)
        phase = np.exp(2j * math.pi * np.multiply.outer(x, self.k))
        mult = (2j * math.pi * self.k) ** deriv
        if deriv % 2:
            mult[-1] = 0.0
        return np.real(phase @ (self.w * mult * self.coef))

    def value(self, x):
        return self._eval(x, 0)

    def d1(self, x):
        return self._eval(x, 1)

    def d2(self, x):
        return self._eval(x, 2)


class KernelSmoothed:
    """Shepard-normalized kernel sum s(x) = sum_j e_j rho(x - x_j) / sum_j rho(x - x_j).

    On nodes this equals the discrete mollification of ``e``; between nodes it is
    a C-infinity function, and it vanishes identically wherever every sample
    within ``width`` is zero.
    """

    def __init__(self, samples: np.ndarray, width: float):
        self.e = np.asarray(samples, dtype=float)
        self.N = self.e.size
        self.width = float(width)
        self.M = int(math.ceil(width * self.N)) + 1

    def evaluate(self, x):
        """Return (s, s', s'') at the points ``x``."""
        x = np.asarray(x, dtype=float)
        flat = np.ravel(x) % 1.0
        N, wd = self.N, self.width
        j0 = np.floor(flat * N).astype(np.int64)
        offs = np.arange(-self.M, self.M + 2)
        J = j0[:, None] + offs[None, :]
        t = (flat[:, None] - J / N) / wd
        r0, r1, r2 = bump(t), bump(t, 1) / wd, bump(t, 2) / wd**2
        e = self.e[J % N]
        D, D1, D2 = r0.sum(1), r1.sum(1), r2.sum(1)
        Nm, N1, N2 = (e * r0).sum(1), (e * r1).sum(1), (e * r2).sum(1)
        s = Nm / D
        s1 = (N1 - s * D1) / D
        s2 = (N2 - 2.0 * s1 * D1 - s * D2) / D
        shape = x.shape
        return s.reshape(shape), s1.reshape(shape), s2.reshape(shape)
