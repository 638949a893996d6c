import numpy as np
import pytest

from conftest import A_CRIT, model, timed_branch
from weakkamlab.aubry import aubry_estimate, aubry_from_margin, classify_aubry
from weakkamlab.errors import InconsistentLevel
from weakkamlab.grid import periodic_distance
from weakkamlab.model import pendulum
from weakkamlab.subsol import strict_subsolution


def classified(name):
    m = model(name)
    return classify_aubry(m, aubry_estimate(m, timed_branch(name)[0].value))


def test_finite_point_for_subcritical_pendulum():
    rep = classified("pend-0.3")
    assert rep.mode == "finite-points" and not rep.boundary
    assert len(rep.points) == 1 and periodic_distance(rep.points[0].x, 0.0) < 1e-9
    assert rep.points[0].p == pytest.approx(-0.3)
    assert rep.points[0].cls == "hyperbolic-fixed-point" and rep.hypothesis_satisfied
    assert set(rep.summary()) >= {"mode", "points", "hypothesis_satisfied"}


def test_mech2_saddle_at_argmax():
    rep = classified("mech2")
    assert rep.mode == "finite-points" and rep.hypothesis_satisfied
    assert rep.points[0].x == pytest.approx(0.0699316, abs=1e-6)


def test_boundary_pendulum_is_a_separatrix():
    rep = classified("pend-2/pi")
    assert rep.mode == "full-circle" and rep.boundary
    assert rep.circle_class == "separatrix" and not rep.hypothesis_satisfied
    assert rep.positions.size == 2048


@pytest.mark.parametrize("name", ["pend-0.8", "pend-1.2"])
def test_rotating_pendulum_is_an_invariant_circle(name):
    rep = classified(name)
    assert rep.mode == "full-circle" and rep.circle_class == "invariant-circle"
    assert rep.monodromy is not None and rep.monodromy.multiplicity_one == 2
    assert not rep.hypothesis_satisfied


def test_full_circle_section_solves_the_equation():
    m = model("pend-1.2")
    a = timed_branch("pend-1.2")[0].value
    rep = aubry_estimate(m, a)
    X = rep.section
    assert abs(X.values.mean()) < 1e-12
    assert np.max(np.abs(m.H(X.x, X.values) - a)) < 1e-8


def test_wrong_level_is_rejected():
    with pytest.raises(InconsistentLevel):
        aubry_estimate(pendulum(0.3), 0.05)
    with pytest.raises(InconsistentLevel):
        aubry_estimate(pendulum(1.2), 0.6)


def test_aubry_from_margin_runs():
    cert = strict_subsolution(pendulum(0.3), 0.0)
    pts = aubry_from_margin(cert)
    assert pts.size == 1 and periodic_distance(pts[0], 0.0) < 1e-9
    a = timed_branch("pend-2/pi")[0].value
    full = aubry_from_margin(strict_subsolution(pendulum(A_CRIT), a))
    assert full.size == 2048
