import numpy as np
import pytest

from droopcert.caseio import load_bundled
from droopcert.model import KuramotoModel, solve_equilibrium
from droopcert.network import build_network

TRIANGLE = [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]
SQUARE = [(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (1, 4, 1.0)]


def make_model(lines, p_star=None, d=None, omega_star=60.0):
    buses = sorted({b for a, c, _ in lines for b in (a, c)})
    net = build_network(buses, lines)
    n = net.n
    p_star = np.zeros(n) if p_star is None else np.asarray(p_star, float)
    d = np.ones(n) if d is None else np.asarray(d, float)
    return KuramotoModel(net, d, p_star, omega_star)


def random_model(lines, rng, p_scale=1.0, d_range=(0.5, 2.0), w_range=(0.5, 2.0)):
    """Random weights, droops and balanced injections on a fixed topology."""
    lines = [(a, b, rng.uniform(*w_range)) for a, b, _ in lines]
    n = len({b for a, c, _ in lines for b in (a, c)})
    p = rng.uniform(-p_scale, p_scale, n)
    p -= p.mean()
    return make_model(lines, p, rng.uniform(*d_range, n))


@pytest.fixture(scope="session")
def rts():
    return load_bundled()


@pytest.fixture(scope="session")
def rts_model(rts):
    return rts[0]


@pytest.fixture(scope="session")
def theta_pre(rts_model):
    return solve_equilibrium(rts_model).state


@pytest.fixture(scope="session")
def rts_post(rts_model):
    return rts_model.remove_lines(["14-16"])


@pytest.fixture
def triangle():
    return make_model(TRIANGLE)


@pytest.fixture
def square():
    return make_model(SQUARE)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
