import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import A_CRIT
from weakkamlab.critical import alpha_branch
from weakkamlab.errors import BoundaryCase, ConfigError, NoSubsolutionAtLevel, VerificationFailed
from weakkamlab.grid import GridField, fd_derivative, nodes, periodic_distance
from weakkamlab.model import branch_momenta, mechanical, pendulum
from weakkamlab.subsol import (SharpPotential, flatten, jensen_margin_bound, mollify_subsolution, perturbed_model,
                               sharp_potential, strict_subsolution, verify_subsolution)

N = 2048
CERTS = {P: strict_subsolution(pendulum(P), 0.0, N) for P in (0.0, 0.3, 0.6)}


def test_blend_weight_and_mean():
    cert = CERTS[0.3]
    assert cert.lam == pytest.approx(0.7356, abs=1e-3)
    assert abs(cert.q.values.mean()) < 1e-14
    assert cert.min_margin >= -1e-12 and cert.passed and not cert.boundary


@pytest.mark.parametrize("P", [0.0, 0.3, 0.6])
def test_strict_off_degenerate_slice(P):
    cert = CERTS[P]
    x = nodes(N)
    far = periodic_distance(x, 0.0) > 0.05
    assert cert.delta.values[far].min() > 0
    assert np.all(cert.degenerate_points < 0.01) or np.all(periodic_distance(cert.degenerate_points, 0.0) < 0.01)


@given(st.floats(0.1, 0.9), st.floats(0.0, 0.6))
def test_blending_strictness_from_convexity(lam, P):
    m = pendulum(P)
    x = nodes(256)
    pm, pp = branch_momenta(m, x, 0.0)
    w = pp - pm
    ok = w >= 1e-6
    q = lam * pp + (1 - lam) * pm
    bound = -1.0 * lam * (1 - lam) * w**2 / 2
    assert np.all(m.H(x, q)[ok] <= bound[ok] + 1e-12)


def test_no_subsolution_below_alpha():
    with pytest.raises(NoSubsolutionAtLevel):
        strict_subsolution(pendulum(1.2), 0.3, 256)


def test_boundary_case_is_forced():
    # at the critical level of the grid problem, not at 0: the grid mean of p+ lags by O(dx^2)
    a = alpha_branch(pendulum(A_CRIT), N).value
    cert = strict_subsolution(pendulum(A_CRIT), a, N)
    assert cert.boundary and cert.lam == 1.0
    assert np.max(np.abs(cert.delta.values)) < 1e-6
    with pytest.raises(BoundaryCase):
        sharp_potential(pendulum(A_CRIT), cert)


def test_verify_constant_for_mechanical():
    u = GridField(np.zeros(256))
    assert verify_subsolution(mechanical(), u, 1.0).min_margin == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(VerificationFailed) as info:
        verify_subsolution(mechanical(), u, 0.5)
    assert info.value.worst_node == 0
    assert verify_subsolution(mechanical(), u, 0.5, strict=False).passed is False


@pytest.mark.parametrize("P", [0.0, 0.3, 0.6])
def test_sharp_potential_properties(P):
    cert = CERTS[P]
    V0 = sharp_potential(pendulum(P), cert, [0.0])
    x = nodes(N)
    v = V0.field.values
    assert np.all(v >= 0) and np.all(2 * v <= cert.delta.values + 1e-15)
    near = periodic_distance(x, 0.0) <= V0.r_zero
    assert np.all(v[near] == 0.0)
    assert np.all(V0.d1(x[near]) == 0.0) and np.all(V0.d2(x[near]) == 0.0)
    for k in range(1, 5):
        assert np.all(fd_derivative(v, k)[periodic_distance(x, 0.0) <= V0.r_zero - 2 / N] == 0.0)
    assert V0.floor_outside([0.0]) > 0


def test_sharp_potential_derivatives():
    V0 = SharpPotential(CERTS[0.3].delta, 0.01)
    x = np.array([0.2, 0.5, 0.9])
    e = 1e-6
    assert np.allclose((V0.value(x + e) - V0.value(x - e)) / (2 * e), V0.d1(x), rtol=1e-5, atol=1e-9)
    assert np.allclose((V0.d1(x + e) - V0.d1(x - e)) / (2 * e), V0.d2(x), rtol=1e-4, atol=1e-7)
    with pytest.raises(ConfigError):
        SharpPotential(CERTS[0.3].delta, 0.2)


@given(st.floats(1e-2, 1.0), st.floats(1e-3, 0.1))
def test_flatten_bounds(s, eps):
    assert 0 < flatten(s, eps) <= s
    assert flatten(-s, eps) == 0.0 and flatten(-s, eps, 1) == 0.0


def test_perturbed_model_from_grid_field():
    V = GridField(0.1 * np.cos(2 * np.pi * nodes(64)))
    m = perturbed_model(pendulum(0.0), V)
    assert float(m.H(0.0, 0.0)) == pytest.approx(-0.5 * 0 + 0.1)
    with pytest.raises(ConfigError):
        perturbed_model(pendulum(0.0), object())


@pytest.mark.parametrize("P", [0.3, 0.6])
def test_mollified_margin_matches_jensen_bound(P):
    m = pendulum(P)
    out = mollify_subsolution(m, CERTS[P], 0.005)
    assert out.meta["deficit_predicted"]
    assert out.meta["min_margin_off_degenerate"] >= -1e-6
    assert np.all(out.delta.values >= out.margin_bound - 1e-10)
    base = verify_subsolution(m, CERTS[P].u, 0.0, strict=False)
    assert np.array_equal(jensen_margin_bound(m, base.q, base.delta, 0.005), out.margin_bound)


def test_mollified_smoothness_under_refinement():
    m = pendulum(0.3)
    sup = []
    for n in (1024, 2048):
        out = mollify_subsolution(m, strict_subsolution(m, 0.0, n), 0.02)
        sup.append(np.max(np.abs(fd_derivative(out.u.values, 4))))
    assert 0.5 <= sup[1] / sup[0] <= 2.0
