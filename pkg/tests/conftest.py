import math

import numpy as np
import pytest

from slowfast import RootMap, load_spec


def ex1_flow(t, x0, mu):
    """Exact flow of mu x' = (-x1 + x2, -x1 - x2) from x0 at t = 0."""
    tau = np.asarray(t, dtype=float) / mu
    x0 = np.asarray(x0, dtype=float)
    jx = np.array([x0[1], -x0[0]])
    c, s, e = np.cos(tau), np.sin(tau), np.exp(-tau)
    return (e * c)[..., None] * x0 + (e * s)[..., None] * jx


def logistic(t, y0):
    """Solution of y' = y (1 - y), y(0) = y0."""
    et = np.exp(t)
    return y0 * et / (1 + y0 * (et - 1))


def ex11_reduced(t, y0=2.0, etas=(1 / 3, 2 / 3, 1.0, 4 / 3, 5 / 3), right=False):
    """Piecewise logistic with squaring at every eta; left-continuous unless ``right``."""
    t = float(t)
    y, s = y0, 0.0
    for e in etas:
        if t < e or (t == e and not right):
            break
        y = logistic(e - s, y) ** 2
        s = e
    return float(logistic(t - s, y))


def ex2_rescaled(tau, z0):
    """Exact solution of dz/dtau = -z - z^3."""
    u0 = z0 * z0
    q = math.exp(-2 * tau)
    return math.copysign(math.sqrt(u0 * q / (1 + u0 * (1 - q))), z0)


@pytest.fixture(scope="session")
def ex1():
    return load_spec("ex1.spec")


@pytest.fixture(scope="session")
def ex2():
    return load_spec("ex2.spec")


@pytest.fixture(scope="session")
def ex11():
    return load_spec("ex11.spec")


@pytest.fixture(scope="session")
def ex2_aux():
    return load_spec("ex2_aux.spec")


def rootmap_of(doc):
    return RootMap.for_model(doc.model, doc.root_guess, isolation_radius=doc.isolation_radius)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
