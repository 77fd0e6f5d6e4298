import json

import numpy as np
import pytest

from bimartingale.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from bimartingale.measure import DiscreteMeasure, parse_csv, save


@pytest.fixture
def files(tmp_path, cross_pair):
    mu, nu = cross_pair
    paths = {}
    for name, m in [("mu", mu), ("nu", nu),
                    ("line", DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])),
                    ("wide", DiscreteMeasure([[-2.0], [0.0], [2.0]], [0.25, 0.5, 0.25])),
                    ("three", DiscreteMeasure([[-2.0], [0.0], [2.0]], [0.2, 0.6, 0.2]))]:
        paths[name] = str(tmp_path / f"{name}.csv")
        save(m, paths[name])
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_identical_files(capsys, files):
    code, out, _ = run(capsys, "z2", files["mu"], files["mu"])
    assert code == EXIT_OK
    assert json.loads(out)["z2"] == 0.0


def test_cross_example_z2_and_index(capsys, files):
    code, out, _ = run(capsys, "z2", files["mu"], files["nu"])
    assert code == EXIT_OK
    assert json.loads(out)["z2"] == pytest.approx(2.5, abs=1e-4)
    code, out, _ = run(capsys, "index", files["mu"], files["nu"])
    data = json.loads(out)
    assert data["defined"] and data["alpha"] == pytest.approx(0.0, abs=1e-6)


def test_input_errors(capsys, files, tmp_path):
    assert run(capsys, "z2", files["mu"], files["line"])[0] == EXIT_INPUT
    assert run(capsys, "z2", files["mu"], str(tmp_path / "missing.csv"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.csv"
    bad.write_text("weight,x1\n0.5,1\n0.2,3\n")
    code, _, err = run(capsys, "lub1d", files["line"], str(bad))
    assert code == EXIT_INPUT and err
    assert run(capsys, "mot-approx", "--demo", ",")[0] == EXIT_INPUT
    assert run(capsys, "z2", files["mu"], files["nu"], "--tol", "0")[0] == EXIT_INPUT


def test_barycentre_mismatch_and_recentre(capsys, files, tmp_path):
    shifted = tmp_path / "shifted.csv"
    save(DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5]), shifted)
    assert run(capsys, "z2", files["line"], str(shifted))[0] == EXIT_INPUT
    code, out, _ = run(capsys, "z2", files["line"], str(shifted), "--recentre")
    assert code == EXIT_OK and json.loads(out)["z2"] == pytest.approx(0.0, abs=1e-7)


def test_solver_failure_exit_code(capsys, files):
    code, _, err = run(capsys, "z2", files["mu"], files["nu"], "--max-iter", "3")
    assert code == EXIT_SOLVER and err


def test_dominate_ordered_pair_returns_larger(capsys, files):
    code, out, err = run(capsys, "dominate", files["line"], files["wide"], "--format", "csv")
    assert code == EXIT_OK
    assert parse_csv(out).allclose(DiscreteMeasure([[-2.0], [0.0], [2.0]], [0.25, 0.5, 0.25]),
                                   atol=1e-6)
    assert "cost" in err


def test_dominate_one_dimensional_matches_lub(capsys, files):
    _, out, _ = run(capsys, "lub1d", files["line"], files["three"])
    m2 = json.loads(out)["m2"]
    _, out, _ = run(capsys, "dominate", files["line"], files["three"])
    data = json.loads(out)
    assert data["cost"] == pytest.approx(m2, abs=1e-6)


def test_w2_project_strassen(capsys, files):
    _, out, _ = run(capsys, "w2", files["mu"], files["nu"])
    assert json.loads(out)["w2"] == pytest.approx(np.sqrt(5.0), abs=1e-6)
    _, out, _ = run(capsys, "project", files["line"], files["wide"])
    assert json.loads(out)["c"] == pytest.approx(2.0, abs=1e-6)
    _, out, _ = run(capsys, "strassen", files["line"], files["wide"])
    assert json.loads(out) == {"feasible": True}
    _, out, _ = run(capsys, "strassen", files["wide"], files["line"])
    assert json.loads(out) == {"feasible": False}


def test_dump_program_is_deterministic(capsys, files, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        assert run(capsys, "z2", files["mu"], files["nu"], "--dump-program", str(path))[0] == 0
    assert a.read_text() == b.read_text() and a.stat().st_size > 0


def test_plan_output(capsys, files, tmp_path):
    plan = tmp_path / "plan.csv"
    run(capsys, "z2", files["mu"], files["nu"], "--plan", str(plan))
    rows = plan.read_text().splitlines()
    assert rows[0] == "i,j,gamma,q_1,q_2,zeta_1,zeta_2"
    assert len(rows) == 1 + 16


def test_demo_instability(capsys):
    code, out, _ = run(capsys, "demo-instability", "1")
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["nu"]["atoms"][0]["x"] == pytest.approx([-0.5, -1.0])


def test_mot_approx_demo(capsys, tmp_path):
    svg = tmp_path / "plot.svg"
    code, out, _ = run(capsys, "mot-approx", "--demo", "3,5,20", "--svg", str(svg))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "n,epsilon,cost,penalty,c_n,res1,res2,iterations,status"
    costs = [float(line.split(",")[2]) for line in lines[1:]]
    assert costs == pytest.approx([0.9223, 0.8209, 0.6928], abs=1e-3)
    assert svg.read_text().startswith("<svg")


def test_mot_approx_files_l2_cost(capsys, files):
    code, out, _ = run(capsys, "mot-approx", files["line"], files["wide"], "--cost", "l2",
                       "--ns", "1,2", "--warm-start")
    assert code == EXIT_OK
    # martingale couplings of the ordered pair all cost m2(wide) - m2(line) = 1
    costs = [float(line.split(",")[2]) for line in out.splitlines()[1:]]
    assert costs == pytest.approx([1.0, 1.0], abs=1e-6)


def test_numbers_use_twelve_digits(capsys, files):
    _, out, _ = run(capsys, "z2", files["mu"], files["nu"])
    for key in ("z2", "c"):
        text = repr(json.loads(out)[key]).rstrip("0").replace(".", "").lstrip("0")
        assert len(text) <= 12
