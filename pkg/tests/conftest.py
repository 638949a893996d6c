import functools
import math
import os
import sys
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from weakkamlab.critical import alpha_branch, alpha_lo  # noqa: E402
from weakkamlab.model import TrigSeries, mechanical, pendulum  # noqa: E402
from weakkamlab.smooth import smooth_subsolution  # noqa: E402
from weakkamlab.weakkam import weak_kam_solve  # noqa: E402

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

A_CRIT = 2.0 / math.pi

MODELS = {
    "mech-cos": lambda: mechanical(),
    "mech2": lambda: mechanical(TrigSeries(0.0, {1: 0.3}, {2: 0.1})),
    "pend-0": lambda: pendulum(0.0),
    "pend-0.3": lambda: pendulum(0.3),
    "pend-0.6": lambda: pendulum(0.6),
    "pend-2/pi": lambda: pendulum(A_CRIT),
    "pend-0.65": lambda: pendulum(0.65),
    "pend-0.8": lambda: pendulum(0.8),
    "pend-1.2": lambda: pendulum(1.2),
}


def model(name):
    return MODELS[name]()


@functools.lru_cache(maxsize=None)
def timed_branch(name, N=2048):
    t = time.perf_counter()
    est = alpha_branch(model(name), N)
    return est, time.perf_counter() - t


@functools.lru_cache(maxsize=None)
def timed_lo(name, N=2048):
    t = time.perf_counter()
    est = alpha_lo(model(name), N)
    return est, time.perf_counter() - t


@functools.lru_cache(maxsize=None)
def timed_solution(P, c=0.0, N=2048, h=0.01):
    t = time.perf_counter()
    sol = weak_kam_solve(pendulum(P), c, N=N, h=h)
    return sol, time.perf_counter() - t


@functools.lru_cache(maxsize=None)
def timed_smooth(P, N=2048):
    t = time.perf_counter()
    res = smooth_subsolution(pendulum(P), N)
    return res, time.perf_counter() - t


@pytest.fixture
def rng():
    return np.random.default_rng(20260314)


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
