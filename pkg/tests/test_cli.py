import csv
import io
import json

import numpy as np
import pytest

from hartree_shape import asymptotics
from hartree_shape.cli import main

PI2 = np.pi**2


@pytest.fixture
def shapes(tmp_path):
    ball = tmp_path / "ball.json"
    ball.write_text('{"type": "ball", "radius": 1.0}')
    y20 = tmp_path / "y20.json"
    y20.write_text('{"type": "nearly_spherical", "base_radius": 1.0, "coeffs": [[2, 0, 0.1]]}')
    flat = tmp_path / "flat.json"
    flat.write_text('{"type": "nearly_spherical", "base_radius": 1.0, "coeffs": []}')
    return {"ball": ball, "y20": y20, "flat": flat, "dir": tmp_path}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_ball(capsys, shapes):
    code, out, _ = run(capsys, "solve", shapes["ball"], "--q", 0)
    res = json.loads(out)
    assert code == 0 and res["E"] == pytest.approx(PI2, rel=1e-5)
    assert set(res) == {"q", "domain", "E", "lambda", "dirichlet", "coulomb", "iters", "residual"}


def test_solve_first_order_window(capsys, shapes):
    code, out, _ = run(capsys, "solve", shapes["ball"], "--q", 0.5)
    E = json.loads(out)["E"]
    assert code == 0 and PI2 < E <= PI2 + 0.25 * asymptotics.coulomb_constant()


def test_solve_missing_file(capsys, shapes):
    code, _, err = run(capsys, "solve", shapes["dir"] / "nope.json", "--q", 0)
    assert code == 1 and "nope.json" in err


def test_solve_malformed_file(capsys, shapes):
    bad = shapes["dir"] / "bad.json"
    bad.write_text('{"type": "nearly_spherical", "base_radius": 1.0, "coeffs": [[2, 0]]}')
    code, _, err = run(capsys, "solve", bad, "--q", 0)
    assert code == 1 and "coeffs[0]" in err


def test_solve_numerical_failure_exit_code(capsys, shapes, monkeypatch):
    from hartree_shape import cli
    from hartree_shape.errors import NumericalFailure

    def fail(*a, **k):
        raise NumericalFailure("no convergence", [1.0, 0.5])

    monkeypatch.setattr(cli, "solve_ground_state", fail)
    code, out, _ = run(capsys, "solve", shapes["ball"], "--q", 1)
    assert code == 2 and json.loads(out)["status"] == "failed"


def test_solve_cartesian_with_grid_and_field(capsys, shapes):
    field = shapes["dir"] / "u.csv"
    code, out, _ = run(capsys, "solve", shapes["y20"], "--q", 0.05, "--grid-n", 24, "--tol", 1e-7, "--field-csv", field)
    assert code == 0 and json.loads(out)["residual"] <= 1e-7
    assert field.read_text().startswith("index,value")


def test_bad_grid_is_usage_error(capsys, shapes):
    code, _, _ = run(capsys, "solve", shapes["ball"], "--q", 0, "--grid-n", 10)
    assert code == 1


def test_sweep(capsys, shapes):
    code, out, _ = run(capsys, "sweep", shapes["ball"], "--q-list", "0,0.1,0.2", "--jobs", 2)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [float(r["q"]) for r in rows] == [0.0, 0.1, 0.2]
    E = [float(r["E"]) for r in rows]
    assert E[0] == pytest.approx(PI2, rel=1e-5) and E[0] <= E[1] <= E[2]
    assert list(rows[0]) == ["q", "E", "lambda", "dirichlet", "coulomb", "status"]


def test_sweep_empty_list(capsys, shapes):
    assert run(capsys, "sweep", shapes["ball"], "--q-list", "")[0] == 1


def test_optimize_flat_start_is_stationary(capsys, shapes):
    out_shape = shapes["dir"] / "final.json"
    trace = shapes["dir"] / "trace.csv"
    code, out, _ = run(
        capsys, "optimize", shapes["flat"], "--q", 0.05, "--l-max", 2, "--grid-n", 24,
        "--out-shape", out_shape, "--trace", trace,
    )
    assert code == 0
    final = json.loads(out_shape.read_text())
    assert all(abs(c[2]) < 1e-12 for c in final["coeffs"])
    assert trace.read_text().splitlines()[0] == "iteration,E,volume,asymmetry,step"


def test_optimize_y20_halves_asymmetry(capsys, shapes):
    out_shape = shapes["dir"] / "final.json"
    trace = shapes["dir"] / "trace.csv"
    code, out, _ = run(
        capsys, "optimize", shapes["y20"], "--q", 0.05, "--l-max", 2, "--grid-n", 32,
        "--out-shape", out_shape, "--trace", trace,
    )
    rows = list(csv.DictReader(io.StringIO(trace.read_text())))
    assert code == 0 and float(rows[-1]["asymmetry"]) < 0.5 * float(rows[0]["asymmetry"])


def test_optimize_invalid_lmax(capsys, shapes):
    code, _, _ = run(
        capsys, "optimize", shapes["y20"], "--q", 0.05, "--l-max", -1,
        "--out-shape", shapes["dir"] / "a.json", "--trace", shapes["dir"] / "b.csv",
    )
    assert code == 1


def test_asymptotics_table(capsys):
    code, out, _ = run(capsys, "asymptotics", "--q-min", 1, "--q-max", 1e4, "--num", 61)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    q = np.array([float(r["q"]) for r in rows])
    U = np.array([float(r["U"]) for r in rows])
    sel = q >= 100
    assert asymptotics.loglog_slope(q[sel], U[sel]) == pytest.approx(0.5, abs=0.05)
    assert int(rows[0]["N_star"]) == 1
    flags = [int(r["crossing"]) for r in rows]
    assert sum(flags) == 1
    first = flags.index(1)
    assert all(float(r["U"]) < float(r["q/4"]) for r in rows[first:])


def test_nondim(capsys, tmp_path):
    p = tmp_path / "p.json"
    me = 9.1093837015e-31
    p.write_text(json.dumps({"m_star_kg": 2 * me, "n_pairs": 2, "epsilon_r": 10, "volume_m3": 4.18879020478639e-24}))
    code, out, _ = run(capsys, "nondim", p)
    assert code == 0 and json.loads(out)["q"] == pytest.approx(302.35618030887923, rel=1e-9)
    p.write_text(json.dumps({"m_star_kg": 2 * me, "n_pairs": 1, "epsilon_r": 10, "volume_m3": 1e-24}))
    assert json.loads(run(capsys, "nondim", p)[1])["q"] == 0.0
    p.write_text(json.dumps({"m_star_kg": 2 * me, "n_pairs": 2, "epsilon_r": 10, "volume_m3": -1.0}))
    assert run(capsys, "nondim", p)[0] == 1
    p.write_text(json.dumps({"n_pairs": 2}))
    code, _, err = run(capsys, "nondim", p)
    assert code == 1 and "m_star_kg" in err


def test_help_documents_grid_and_tol(capsys):
    with pytest.raises(SystemExit):
        main(["solve", "--help"])
    out = capsys.readouterr().out
    assert "--grid-n" in out and "--tol" in out
