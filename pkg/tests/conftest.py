import numpy as np
import pytest

from llcontrol.discretization import Discretization, MagnetizationField
from llcontrol.model import PhysicalParams

# Lemma constants C (residual = C h^2, relative to the integrand scale) from one
# calibration run on llcontrol.verification.calibration_field at 32 elements.
CALIBRATED = {"zero_integral": 1.1993596780698813e-14, "product_rule": 1.7908046395249022}

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def lemma_constants():
    return dict(CALIBRATED)


@pytest.fixture
def default_params():
    return PhysicalParams(nu=0.02, length=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sine_cosine(disc):
    x = disc.mesh.nodes
    return MagnetizationField(np.column_stack((np.sin(2 * np.pi * x), np.cos(2 * np.pi * x),
                                               np.zeros_like(x))), disc.mesh)


def planar_g(disc):
    """(cos g, sin g, 0) with g = pi x^2 (3 - 2x); g' vanishes at both ends."""
    x = disc.mesh.nodes
    g = np.pi * x**2 * (3 - 2 * x)
    return MagnetizationField(np.column_stack((np.cos(g), np.sin(g), np.zeros_like(x))), disc.mesh)


@pytest.fixture
def disc12():
    return Discretization.uniform(12, 1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
