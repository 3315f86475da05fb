import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowerlab import calibrate_backward, calibrate_petal, germ_from_terms, lattice_data
from flowerlab.domains import CalibrationConfig

settings.register_profile("lab", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def worked():
    """M = (1, 1), a = (-1/2, -1/2), A = 0 with calibrated forward and backward petals."""
    g = germ_from_terms((1, 1), (-0.5, -0.5))
    lat = lattice_data(g.M)
    fwd = calibrate_petal(g, lat)
    bwd = calibrate_backward(g, lat, fwd)
    return g, lat, fwd, bwd


@pytest.fixture(scope="session")
def skew():
    """M = (1, 1), a = (-1/4, -3/4): u_I is not identically 1 here."""
    g = germ_from_terms((1, 1), (-0.25, -0.75))
    lat = lattice_data(g.M)
    return g, lat, calibrate_petal(g, lat, CalibrationConfig(samples=4000))


@pytest.fixture(scope="session")
def quad():
    """Worked leading part plus quadratic terms, on a small petal."""
    g = germ_from_terms((1, 1), (-0.5, -0.5), {0: [((2, 0), 0.3)], 1: [((1, 1), -0.2j)]})
    lat = lattice_data(g.M)
    return g, lat, calibrate_petal(g, lat, CalibrationConfig(samples=4000, epsilon=0.05))


@pytest.fixture(scope="session")
def one_dim():
    g = germ_from_terms((1,), (-1.0,))
    lat = lattice_data(g.M)
    fwd = calibrate_petal(g, lat)
    return g, lat, fwd, calibrate_backward(g, lat, fwd)


def rng(seed=0):
    return np.random.default_rng(seed)


TWO_PI = 2 * math.pi


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
