import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hartree_shape.geometry import Ball, RadialGrid
from hartree_shape.hartree import SolverConfig, solve_ground_state

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def report():
    def _report(criterion, ok, detail):
        ACCEPTANCE[criterion] = (bool(ok), detail)
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _report


@functools.lru_cache(maxsize=None)
def ball_state(q, radius=1.0, n=2049):
    return solve_ground_state(Ball(radius), q, SolverConfig(radial_n=n))


@pytest.fixture
def unit_ball_state():
    return ball_state


def analytic_ball_mode(grid):
    """sin(pi r) / (r sqrt(2 pi)), the normalized first Dirichlet mode of B_1."""
    r = grid.r
    return np.where(r < 1.0, np.pi * np.sinc(r) / np.sqrt(2.0 * np.pi), 0.0)


@pytest.fixture
def radial_grid():
    return RadialGrid(1.0, 1025)
