import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bjbd.core import MatrixSet, Partition
from bjbd.synth import random_block_diagonal, rng_for

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def planted_two_block(q1, q2, m=5, seed=0, sigma=0.0):
    """``{Z diag(P1_i, P2_i) Z^T}`` with random square Z, plus optional noise."""
    rng = rng_for(seed)
    tau = Partition((q1, q2))
    Z = rng.standard_normal((q1 + q2, q1 + q2))
    Phi = random_block_diagonal(rng, tau, m)
    D = Z @ Phi @ Z.T
    if sigma:
        D = D + sigma * rng.standard_normal(D.shape)
    return MatrixSet(D), Z, tau


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
