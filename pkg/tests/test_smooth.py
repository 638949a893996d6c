import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import A_CRIT, model, timed_branch, timed_smooth
from weakkamlab.errors import BlendMarginFailure, ConfigError, HypothesisNotSatisfied
from weakkamlab.grid import GridField, gradient, nodes
from weakkamlab.model import pendulum
from weakkamlab.smooth import cutoff, smooth_subsolution, smoothness_report


@given(st.floats(0.0, 0.5), st.floats(0.01, 0.2), st.floats(0.01, 0.2))
def test_cutoff_range_and_support(r, a, b):
    r_in, r_out = min(a, b), max(a, b) + 0.01
    c = float(cutoff(r, r_in, r_out))
    assert 0.0 <= c <= 1.0
    if r <= r_in:
        assert c == 1.0
    if r >= r_out:
        assert c == 0.0


def test_cutoff_monotone():
    r = np.linspace(0, 0.3, 3001)
    assert np.all(np.diff(cutoff(r, 0.05, 0.12)) <= 1e-15)


def test_smoothness_report_on_analytic_field():
    f = lambda N: GridField(np.sin(2 * np.pi * nodes(N)))  # noqa: E731
    rep = smoothness_report(f(1024), f(2048))
    assert rep["passed"] and rep["ratio4"] == pytest.approx(1.0, abs=1e-4)
    rough = GridField(np.abs(np.sin(2 * np.pi * nodes(2048))))
    assert not smoothness_report(GridField(np.abs(np.sin(2 * np.pi * nodes(1024)))), rough)["passed"]


def test_result_for_subcritical_pendulum():
    res, _ = timed_smooth(0.3)
    assert res.passed and res.min_eta >= -1e-8
    assert np.array_equal(res.dw.values, gradient(res.w).values)
    m = pendulum(0.3)
    eta = res.alpha - m.H(res.w.x, res.dw.values)
    assert np.max(np.abs(eta - res.eta.values)) < 1e-15
    assert res.germ_error < 1e-9
    tr = res.trace
    assert tr["blend"] == "slope" and tr["aubry"]["mode"] == "finite-points"
    assert tr["aubry_margin_distance"] < 2 / 2048
    s = res.summary()
    assert s["passed"] and s["N"] == 2048 and s["smoothness"]["passed"]


def test_mechanical_end_to_end():
    est, _ = timed_branch("mech2")
    res = smooth_subsolution(model("mech2"), 1024, alpha_value=est.value, refine=False)
    assert res.passed and res.min_eta >= -1e-8 and res.strict_floor > 1e-3
    assert abs(res.aubry_points[0] - 0.0699316) < 1e-6


def test_boundary_pendulum_rejected():
    a = timed_branch("pend-2/pi")[0].value
    with pytest.raises(HypothesisNotSatisfied):
        smooth_subsolution(pendulum(A_CRIT), 2048, alpha_value=a, refine=False)


def test_value_blend_loses_margin():
    # the chi' (u_loc + k - u_s) term is not controlled by the margin
    with pytest.raises(BlendMarginFailure) as info:
        smooth_subsolution(pendulum(0.3), 1024, alpha_value=0.0, blend="value", refine=False, max_shrink=0)
    assert info.value.stage == "glue" and info.value.worst_margin < 0


def test_bad_radii():
    with pytest.raises(ConfigError):
        smooth_subsolution(pendulum(0.3), 512, alpha_value=0.0, radii=(0.1, 0.05), refine=False)
    with pytest.raises(ConfigError):
        smooth_subsolution(pendulum(0.3), 512, alpha_value=0.0, radii=(0.1, 0.25), refine=False)
