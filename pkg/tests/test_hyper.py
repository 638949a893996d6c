import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from weakkamlab.errors import ConfigError, NotSymplectic
from weakkamlab.grid import nodes, wrap_signed
from weakkamlab.hyper import (analyze_fixed_point, analyze_monodromy, fd_linearization, find_fixed_points,
                              linearization, local_solution, orbit_monodromy, read_monodromy, symplectic_form,
                              unstable_oneform)
from weakkamlab.model import Covector, TrigSeries, mechanical, pendulum

shifts = st.floats(-1.0, 1.0)


def block(lam=3.0, angle=None):
    M = np.zeros((4, 4))
    M[:2, :2] = [[1.0, 1.0], [0.0, 1.0]]
    if angle is None:
        M[2:, 2:] = np.diag([lam, 1.0 / lam])
    else:
        c, s = math.cos(angle), math.sin(angle)
        M[2:, 2:] = [[c, -s], [s, c]]
    return M


@given(shifts)
@settings(max_examples=20)
def test_pendulum_fixed_points(P):
    fps = find_fixed_points(pendulum(P))
    xs = sorted(round(f.x, 9) % 1.0 for f in fps)
    assert xs == [0.0, 0.5]
    assert all(abs(f.p + P) < 1e-12 for f in fps)


def test_saddle_at_potential_maximum():
    m = pendulum(0.3)
    fp = [f for f in find_fixed_points(m) if abs(wrap_signed(f.x)) < 1e-9][0]
    an = analyze_fixed_point(m, fp)
    assert an.hyperbolic and an.transversal
    assert np.allclose(sorted(an.eigenvalues.real), [-math.pi, math.pi], atol=1e-12)
    assert an.unstable_slope == pytest.approx(math.pi)
    centre = analyze_fixed_point(m, Covector(0.5, -0.3))
    assert not centre.hyperbolic and centre.unstable is None


def test_linearization_matches_finite_differences():
    m = mechanical(TrigSeries(0.0, {1: 0.3}, {2: 0.1}), TrigSeries(1.0, {1: 0.2}))
    for x, p in ((0.1, 0.3), (0.7, -0.4)):
        assert np.max(np.abs(linearization(m, x, p) - fd_linearization(m, x, p))) < 1e-7


def test_flat_potential_reports_continuum():
    m = mechanical(TrigSeries(0.2))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fps = find_fixed_points(m)
    assert fps.continuum and len(fps) == 0 and caught


def test_monodromy_block_example():
    mono = analyze_monodromy(block(), Y=[1, 0, 0, 0], dH=[0, 1, 0, 0])
    assert mono.hyperbolic and mono.multiplicity_one == 2
    r = mono.residuals
    assert r["dim_sum"] == 3 and r["intersection_is_RY"] and r["sum_equals_ker_dH"]
    assert r["lagrangian_plus"] < 1e-12 and r["lagrangian_minus"] < 1e-12
    e1, e3, e4 = np.eye(4)[0], np.eye(4)[2], np.eye(4)[3]
    for W, extra in ((mono.W_plus, e3), (mono.W_minus, e4)):
        span = np.column_stack([e1, extra])
        assert np.linalg.matrix_rank(np.hstack([W, span]), tol=1e-10) == 2


@pytest.mark.parametrize("M", [np.eye(4), block(angle=0.7), np.eye(2)])
def test_monodromy_non_hyperbolic(M):
    assert not analyze_monodromy(M).hyperbolic


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_monodromy_verdict_symplectic_invariance(seed):
    rng = np.random.default_rng(seed)
    S = oracles.random_symplectic(rng, 4)
    Si = np.linalg.inv(S)
    assert analyze_monodromy(S @ block() @ Si).hyperbolic
    assert not analyze_monodromy(S @ block(angle=0.7) @ Si).hyperbolic


def test_split_layout_and_not_symplectic():
    J = symplectic_form(4, "split")
    assert np.allclose(J, -J.T) and np.allclose(J @ J, -np.eye(4))
    with pytest.raises(NotSymplectic):
        analyze_monodromy(np.diag([2.0, 1.0, 1.0, 1.0]))
    with pytest.raises(ConfigError):
        symplectic_form(4, "weird")


def test_read_monodromy(tmp_path):
    path = tmp_path / "m.txt"
    rows = "\n".join(" ".join("%.17g" % v for v in row) for row in block())
    path.write_text(f"4\n{rows}\n1 0 0 0\n0 1 0 0\n")
    M, Y, dH = read_monodromy(path)
    assert np.array_equal(M, block()) and Y.tolist() == [1, 0, 0, 0] and dH.tolist() == [0, 1, 0, 0]
    path.write_text("3\n1 2\n")
    with pytest.raises(ConfigError):
        read_monodromy(path)


def test_orbit_monodromy_of_rotating_orbit():
    m = pendulum(0.7)
    M = orbit_monodromy(m, 0.0, 0.3, 1.0)
    assert abs(np.linalg.det(M) - 1.0) < 1e-8
    mono = analyze_monodromy(M)
    assert not mono.hyperbolic


@given(st.floats(0.0, 0.6))
@settings(max_examples=10)
def test_unstable_chart_is_the_sine_branch(P):
    m = pendulum(P)
    an = analyze_fixed_point(m, Covector(0.0, -P))
    chart = unstable_oneform(m, an, 0.0, 0.2, 512)
    assert np.max(np.abs(chart.p - (-P + oracles.pendulum_unstable_slope(chart.s)))) < 1e-12
    assert chart.defect < 1e-12 and chart.center_slope == pytest.approx(math.pi, abs=1e-5)
    s = np.linspace(-0.2, 0.2, 7)
    assert np.allclose(chart.evaluate(s), -P + np.sin(np.pi * s), atol=1e-12)


def test_local_solution_is_primitive_of_unstable_form():
    m = pendulum(0.3)
    an = analyze_fixed_point(m, Covector(0.0, -0.3))
    loc = local_solution(unstable_oneform(m, an, 0.0, 0.2, 512))
    ref = (1.0 - np.cos(np.pi * loc.s)) / np.pi - 0.3 * loc.s
    assert np.max(np.abs(loc.u - ref)) < 1e-12
    idx, vals = loc.to_field(512)
    assert idx.size == loc.s.size and np.all(nodes(512)[idx] == loc.x)


def test_chart_needs_hyperbolic_point_on_level():
    m = pendulum(0.3)
    an = analyze_fixed_point(m, Covector(0.0, -0.3))
    with pytest.raises(ConfigError):
        unstable_oneform(m, an, 0.1)
    with pytest.raises(ConfigError):
        unstable_oneform(m, analyze_fixed_point(m, Covector(0.5, -0.3)), -0.5)
