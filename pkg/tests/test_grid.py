import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakkamlab.errors import ConfigError
from weakkamlab.grid import (GridField, KernelSmoothed, TrigInterpolant, bump, central_primitive, check_resolution,
                             erode, fd_derivative, gradient, kernel_weights, mollify, nodes, periodic_distance,
                             primitive, set_distance, slope_report, smooth_step, wrap_signed)

coeffs = st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4)


def trig(c, N):
    x = nodes(N)
    return c[0] * np.cos(2 * np.pi * x) + c[1] * np.sin(2 * np.pi * x) + c[2] * np.cos(6 * np.pi * x) \
        + c[3] * np.sin(4 * np.pi * x)


@pytest.mark.parametrize("N", [0, 15, 100, 8])
def test_resolution_rejected(N):
    with pytest.raises(ConfigError):
        check_resolution(N)


def test_gridfield_is_read_only_and_finite():
    f = GridField(np.zeros(16))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ConfigError):
        GridField(np.full(16, np.nan))


@given(coeffs)
def test_central_primitive_inverts_central_gradient(c):
    q = GridField(trig(c, 256))
    u = central_primitive(q)
    assert np.max(np.abs(gradient(u).values - q.values)) < 1e-10
    assert u.values[0] == 0.0


@given(coeffs)
def test_primitive_of_gradient(c):
    u = GridField(trig(c, 1024))
    q = gradient(u, "spectral")
    back = primitive(q)
    assert np.max(np.abs(back.values - (u.values - u.values[0]))) < 1e-4


def test_primitive_requires_zero_mean():
    with pytest.raises(ConfigError):
        primitive(GridField(np.ones(16)))


def test_fd_derivative_orders():
    N = 512
    x = nodes(N)
    u = np.sin(2 * np.pi * x)
    k = 2 * np.pi
    exact = [k * np.cos(k * x), -k**2 * u, -k**3 * np.cos(k * x), k**4 * u]
    for order in range(1, 5):
        err = np.max(np.abs(fd_derivative(u, order) - exact[order - 1])) / k**order
        assert err < 1e-3


def test_bump_and_step():
    assert bump(1.0) == 0.0 and bump(0.0) == pytest.approx(np.exp(-1))
    t = np.linspace(-0.5, 1.5, 401)
    s = smooth_step(t)
    assert np.all(np.diff(s) >= -1e-15)
    assert np.all(s[t <= 0] == 0.0) and np.all(s[t >= 1] == 1.0)
    assert smooth_step(0.5) == pytest.approx(0.5, abs=1e-12)
    e = 1e-6
    assert (smooth_step(0.3 + e) - smooth_step(0.3 - e)) / (2 * e) == pytest.approx(float(smooth_step(0.3, 1)), rel=1e-6)


@given(coeffs, st.floats(0.01, 0.2))
def test_mollify_preserves_constants_and_mean(c, width):
    f = GridField(trig(c, 256) + 3.0)
    g = mollify(f, width)
    assert abs(np.mean(g.values) - np.mean(f.values)) < 1e-12
    assert np.allclose(mollify(GridField(np.full(256, 2.5)), width).values, 2.5)


def test_mollify_has_compact_support():
    v = np.zeros(256)
    v[100] = 1.0
    g = mollify(GridField(v), 0.05)
    support = np.flatnonzero(np.abs(g.values) > 0)
    assert support.min() >= 100 - 0.05 * 256 and support.max() <= 100 + 0.05 * 256


def test_kernel_weights_normalized():
    off, w = kernel_weights(0.01, 2048)
    assert w.sum() == pytest.approx(1.0) and np.all(w > 0) and off.max() <= 20


def test_erode_and_distances():
    v = np.ones(64)
    v[10] = 0.0
    e = erode(GridField(v), 2 / 64)
    assert np.flatnonzero(e.values == 0.0).tolist() == [8, 9, 10, 11, 12]
    assert periodic_distance(0.95, 0.05) == pytest.approx(0.1)
    assert wrap_signed(0.75) == pytest.approx(-0.25)
    assert set_distance([0.0], [0.99]) == pytest.approx(0.01)
    assert set_distance([], []) == 0.0


def test_slope_report_flags_jump():
    u = np.zeros(128)
    u[64:] = 1.0
    rep = slope_report(GridField(u + 1e-3 * np.sin(2 * np.pi * nodes(128))))
    assert rep.flagged


def test_trig_interpolant_reproduces_samples_and_derivative():
    f = GridField(trig([0.3, -0.2, 0.1, 0.4], 64))
    ti = TrigInterpolant(f)
    assert np.allclose(ti.value(f.x), f.values, atol=1e-13)
    x = np.array([0.123, 0.777])
    e = 1e-6
    assert np.allclose((ti.value(x + e) - ti.value(x - e)) / (2 * e), ti.d1(x), atol=1e-6)


def test_kernel_smoothed_zero_where_samples_vanish():
    e = np.zeros(256)
    e[128:] = 1.0
    ks = KernelSmoothed(e, 0.02)
    s, s1, s2 = ks.evaluate(np.array([0.1, 0.495]))
    assert s[0] == 0.0 and s1[0] == 0.0 and s2[0] == 0.0
    assert 0.0 < s[1] < 1.0
