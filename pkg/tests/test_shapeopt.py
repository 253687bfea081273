import numpy as np
import pytest

from hartree_shape.errors import DiagnosticsError
from hartree_shape.geometry import Ball, NearlySpherical, UNIT_BALL_VOLUME, rescale_to_unit_volume
from hartree_shape.hartree import SolverConfig, solve_ground_state
from hartree_shape.shapeopt import (
    DescentOptions,
    boundary_gradient_statistics,
    design_modes,
    fk_deficit,
    shape_descent,
)

PI2 = np.pi**2
CART = SolverConfig(discretization="cartesian", theta=1.0)
SMALL = DescentOptions(l_max=2, grid_n=32, max_iter=6)


def test_design_modes_skip_translations():
    modes = design_modes(4)
    assert len(modes) == 21 and all(l >= 2 for l, _ in modes)
    assert design_modes(1) == []


def test_options_validation():
    with pytest.raises(ValueError):
        DescentOptions(l_max=-1)
    with pytest.raises(ValueError):
        DescentOptions(fd_step=0.0)


def test_ball_is_stationary():
    final, trace = shape_descent(NearlySpherical(1.0, {}), 0.05, SMALL)
    assert trace.terminated == "gradient tolerance"
    assert len(trace.records) == 1
    assert all(abs(v) < 1e-12 for v in final.coeff_dict.values())


@pytest.fixture(scope="module")
def small_descent():
    return shape_descent(NearlySpherical(1.0, {(2, 0): 0.1}), 0.05, SMALL)


def test_descent_contracts(small_descent):
    final, trace = small_descent
    E = trace.energies
    assert all(b <= a for a, b in zip(E, E[1:]))
    for rec in trace.records:
        assert rec.volume == pytest.approx(UNIT_BALL_VOLUME, rel=1e-10)
    assert trace.records[-1].asymmetry < 0.5 * trace.records[0].asymmetry


def test_descent_trace_csv(small_descent, tmp_path):
    _, trace = small_descent
    trace.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,E,volume,asymmetry,step"
    assert len(lines) == len(trace.records) + 1


def test_zero_charge_descent_reaches_ball_energy():
    final, trace = shape_descent(NearlySpherical(1.0, {(2, 2): 0.08}), 0.0, SMALL)
    assert trace.records[-1].E == pytest.approx(trace.ball_energy, rel=0.01)


def test_fk_deficit_examples():
    ball = fk_deficit(Ball(1.0))
    assert ball["deficit"] == pytest.approx(0.0, abs=1e-9) and ball["asymmetry"] == pytest.approx(0.0, abs=1e-6)
    assert fk_deficit(Ball(2.0))["deficit"] == pytest.approx(0.0, abs=1e-9)
    r = fk_deficit(NearlySpherical(1.0, {(2, 0): 0.1}))
    assert r["deficit"] > 0 and r["deficit"] >= 0.01 * r["asymmetry"] ** 2


def test_boundary_statistics_ball_vs_perturbed():
    ball = solve_ground_state(Ball(1.0), 0.05, CART)
    s_ball = boundary_gradient_statistics(ball, Ball(1.0))
    assert s_ball["rel_stddev"] <= 0.05
    d, _ = rescale_to_unit_volume(NearlySpherical(1.0, {(2, 0): 0.25}))
    s_bad = boundary_gradient_statistics(solve_ground_state(d, 0.05, CART), d)
    assert s_bad["rel_stddev"] > 3 * s_ball["rel_stddev"]


def test_boundary_statistics_need_samples():
    radial = solve_ground_state(Ball(1.0), 0.05)
    with pytest.raises(DiagnosticsError):
        boundary_gradient_statistics(radial, Ball(1.0))
