import csv

import msgspec
import pytest

from conftest import INSTANCES
from pitchopt.cli import main
from pitchopt.milp import read_model


def run(capsys, tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code, capsys.readouterr()


def manifest(tmp_path):
    return msgspec.json.decode((tmp_path / "manifest.json").read_bytes())


def test_noise(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "noise", "--sequence", "1311323331", "--plot-script")
    assert code == 0
    assert "exact noise  9.0" in out.out
    assert "tire length  51" in out.out
    with open(tmp_path / "spectrum.csv", newline="") as file:
        rows = list(csv.reader(file))
    assert rows[0] == ["k", "a_k", "b_k", "modulus"]
    assert len(rows) == 17
    assert "spectrum.csv" in (tmp_path / "spectrum.gp").read_text()
    assert manifest(tmp_path)["command"] == "noise"


def test_noise_harmonics_override(capsys, tmp_path):
    code, _ = run(capsys, tmp_path, "noise", "--sequence", "1311323331", "-K", "30")
    assert code == 0
    assert (tmp_path / "spectrum.csv").read_text().count("\n") == 32


def test_noise_rejects_unknown_types(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "noise", "--sequence", "1241")
    assert code == 2
    assert out.err.startswith("pitchopt: error:")


def test_solve_exact(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "solve-exact", "--triple", "10,2,4")
    assert code == 0
    assert "status       optimal" in out.out
    document = msgspec.json.decode((tmp_path / "result.json").read_bytes())
    assert document["status"] == "optimal"
    assert document["exact_noise"] == pytest.approx(9.268, rel=5e-3)
    with open(tmp_path / "incumbents.csv", newline="") as file:
        rows = list(csv.reader(file))
    assert rows[0] == ["elapsed", "value", "sequence"]
    assert rows[-1][2] == document["best_sequence"]
    recorded = manifest(tmp_path)
    assert recorded["instance"] == "(10,2,4)"
    assert recorded["options"]["triple"] == [10, 2, 4]
    assert recorded["options"]["symmetry"] == "rotation-cuts"


def test_cutoff_exits_with_one(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "solve-exact", "--triple", "10,2,4", "--upper-bound", "5")
    assert code == 1
    assert "status       cutoff" in out.out


def test_infeasible_instance(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "solve-exact", "--triple", "10,4,6")
    assert code == 1
    assert "pitchopt: error:" in out.err


def test_instance_and_triple_are_exclusive(capsys, tmp_path):
    path = str(INSTANCES / "n10_1_8.inst")
    code, _ = run(capsys, tmp_path, "solve-exact", "--triple", "10,1,8", "--instance", path)
    assert code == 2


def test_bad_triple(capsys, tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["solve-exact", "--triple", "10,1", "--out", str(tmp_path)])
    assert excinfo.value.code == 2


def test_solve_approx(capsys, tmp_path):
    code, out = run(
        capsys, tmp_path, "solve-approx", "--instance", str(INSTANCES / "n10_3_4.inst"),
        "--optimal", "9.367",
    )
    assert code == 0
    assert "gap" in out.out
    document = msgspec.json.decode((tmp_path / "result.json").read_bytes())
    assert document["objective"] == "approx"
    assert document["optimal_reference"] == 9.367


def test_ga(capsys, tmp_path):
    code, out = run(
        capsys, tmp_path, "ga", "--triple", "10,2,6", "--population", "40", "--generations", "5",
        "--seed", "1",
    )
    assert code == 0
    assert "generations" in out.out
    with open(tmp_path / "trace.csv", newline="") as file:
        assert next(csv.reader(file)) == ["generation", "best", "mean", "feasible"]
    assert manifest(tmp_path)["options"]["population"] == 40


def test_export_lp(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "export-lp", "--triple", "10,1,8", "--j", "3")
    assert code == 0
    assert "tire length  57" in out.out
    model = read_model(tmp_path / "model_j3.lp")
    assert (model.j, model.tire_length, model.n_pitches, model.harmonics) == (3, 57, 10, 15)
    assert model.lengths == (4, 5, 6)


def test_export_lp_rejects_bad_j(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "export-lp", "--triple", "10,1,8", "--j", "21")
    assert code == 2
    assert "j=21" in out.err


def test_graph(capsys, tmp_path):
    code, out = run(
        capsys, tmp_path, "graph", "--instance", str(INSTANCES / "graph_example.inst"),
        "--tire-length", "6", "-N", "2",
    )
    assert code == 0
    assert "paths (N=2) 3" in out.out
    assert "arcs         33" in out.out
    assert (tmp_path / "graph_T6.txt").read_text().startswith("# T=6")


def test_table(capsys, tmp_path):
    code, _ = run(capsys, tmp_path, "table", "--triple", "10,3,4", "--triple", "10,4,6")
    assert code == 1
    with open(tmp_path / "table.csv", newline="") as file:
        rows = list(csv.reader(file))
    assert rows[0][:3] == ["instance", "optimal_noise", "optimal_sequence"]
    assert rows[1][0] == "(10,3,4)"
    assert float(rows[1][1]) == pytest.approx(9.367, abs=2e-3)
    assert rows[2][:4] == ["(10,4,6)", "", "", "infeasible"]


def test_empty_table(capsys, tmp_path):
    code, _ = run(capsys, tmp_path, "table")
    assert code == 0
    assert (tmp_path / "table.csv").read_text().count("\n") == 1
    assert manifest(tmp_path)["instance"] is None


def test_workers_setting_is_validated(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "table", "--workers", "0")
    assert code == 2
    assert "workers" in out.err
