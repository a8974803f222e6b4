import math

import pytest
from hypothesis import HealthCheck, settings

from optoshake.model import REFERENCE, ReducedParams

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Store a one-line acceptance verdict for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def reference():
    return REFERENCE


@pytest.fixture
def damped():
    """Strongly damped toy system that relaxes within a few hundred time
    units."""
    return ReducedParams(delta_c_prime=1.0, G_re=0.2, G_im=0.05, kappa=0.4, gamma=0.1, n_th=3.0)


def rel_err(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale else 0.0


TWO_PI = 2 * math.pi
