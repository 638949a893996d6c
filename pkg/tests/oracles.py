"""Independent reference values, written without using the package internals."""

import math

import mpmath
import numpy as np


def dense_scan_max(f, step=1e-6):
    """max of a 1-periodic function on a uniform grid of spacing ``step``."""
    n = int(round(1.0 / step))
    x = np.arange(n, dtype=float) * step
    vals = f(x)
    i = int(np.argmax(vals))
    return float(vals[i]), float(x[i])


def pendulum_rotation_level(P, dps=30, tol=1e-14):
    """Root c of int_0^1 sqrt(2c + sin^2(pi x)) dx = P, by bisection on mpmath quadrature."""
    mpmath.mp.dps = dps
    P = mpmath.mpf(P)

    def mean_speed(c):
        return mpmath.quad(lambda x: mpmath.sqrt(2 * c + mpmath.sin(mpmath.pi * x) ** 2), [0, 0.5, 1])

    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    while mean_speed(hi) < P:
        hi *= 2
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mean_speed(mid) < P:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def pendulum_viscosity_solution(x):
    """Weak KAM solution at P = 0: primitive of sign(1/2 - x) |sin(pi x)|, peaked at 1/2."""
    x = np.asarray(x, float) % 1.0
    return np.where(x <= 0.5, (1.0 - np.cos(np.pi * x)) / np.pi, (1.0 + np.cos(np.pi * x)) / np.pi)


def pendulum_unstable_slope(x):
    """Unstable branch through (0, -P) of H_P at level 0, in the shifted momentum p + P."""
    return np.sin(np.pi * np.asarray(x, float))


def random_symplectic(rng, n2, scale=0.3):
    """exp(J S) for a random symmetric S, with J in interleaved (x1, p1, x2, p2, ...) order."""
    from scipy.linalg import expm
    J = np.zeros((n2, n2))
    for i in range(0, n2, 2):
        J[i, i + 1], J[i + 1, i] = 1.0, -1.0
    A = rng.normal(size=(n2, n2)) * scale
    return expm(J @ (A + A.T))


def random_field(rng, N, modes=6, amp=0.1):
    """Random trigonometric field with slopes of order amp * 2 pi."""
    x = np.arange(N) / N
    k = np.arange(1, modes + 1)[:, None]
    a, b = rng.normal(size=(2, modes, 1)) * amp / k**2
    return np.sum(a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x), axis=0)


MECH2_V = lambda x: 0.3 * np.cos(2 * math.pi * x) + 0.1 * np.sin(4 * math.pi * x)  # noqa: E731
