import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from robust_td.harness.instances import generate_instance
from robust_td.mrp import Mrp

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stochastic(m, rng, floor=0.0):
    P = rng.dirichlet(np.ones(m), size=m)
    if floor:
        P = np.maximum(P, floor)
        P /= P.sum(axis=1, keepdims=True)
    return P


def tabular_mrp(m, gamma, seed, reward_lo=0.0, reward_hi=1.0, floor=1e-3):
    rng = np.random.default_rng(seed)
    P = random_stochastic(m, rng, floor)
    R = rng.uniform(reward_lo, reward_hi, m)
    return Mrp(P, R, gamma, np.eye(m))


@pytest.fixture
def small_mrp():
    return generate_instance(8, 3, 0.7, 0.0, 2.0, seed=11)


@pytest.fixture
def reference_mrp():
    return generate_instance(100, 10, 0.5, 0.0, 5.0, seed=0)


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
