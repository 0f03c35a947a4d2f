import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from driftlab import solver
from driftlab.fields import Grid
from driftlab.geometry import shipped_spaces

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


def kernel_oracle(r, t, n=3):
    """Closed-form Euclidean heat kernel, written out independently of the package."""
    r = np.asarray(r, dtype=float)
    return (4 * np.pi * t) ** (-n / 2) * np.exp(-(r**2) / (4 * t))


@pytest.fixture(scope="session")
def spaces():
    return shipped_spaces()


@pytest.fixture(scope="session")
def euclid(spaces):
    return spaces["euclidean3"]


@pytest.fixture(scope="session")
def kernel_solution(euclid):
    """Flat heat kernel started at t0=0.5, verified on B_1 over [0, 1.5]."""
    return solver.solve_parabolic(euclid, None, "heat_kernel(0.5)", Grid(0.01, 1.0, nt=6, cfl=0.5), 1.5, pad=5.0)


@pytest.fixture(scope="session")
def coarse_kernel(euclid):
    return solver.solve_parabolic(euclid, None, "heat_kernel(0.5)", Grid(0.04, 1.0, nt=4, cfl=0.5), 1.0, pad=4.0)
