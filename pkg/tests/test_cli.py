import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from slowfast.cli import DEFAULT_OUT, OUT_ENV, main

from conftest import ex11_reduced

NO_ROOT = """
[system]
horizon = 1
fast = z

[fast_field]
z = -z

[initial]
z = 1
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("cmd", ["simulate", "reduce", "study", "layers", "check"])
def test_help_exits_zero_without_output(cmd, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as err:
        main([cmd, "--help"])
    assert err.value.code == 0
    assert "--rtol" in capsys.readouterr().out
    assert list(tmp_path.iterdir()) == []


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "slowfast", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout


def test_simulate_writes_trajectory(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "ex1.spec", "--mu", "0.05", "--out", tmp_path)
    assert code == 0 and "11 segments" in out
    rows = read_csv(tmp_path / "ex1_mu0.05_trajectory.csv")
    assert rows[0] == ["t", "z1", "z2", "segment_id"]
    assert float(rows[1][1]) == 1.5 and float(rows[1][2]) == -1.5
    jumps = read_csv(tmp_path / "ex1_mu0.05_jumps.csv")
    assert len(jumps) == 11
    meta = json.loads((tmp_path / "ex1_mu0.05_meta.json").read_text())
    assert meta["steps"]["accepted"] > 0 and len(meta["spec_sha256"]) == 64
    assert "created_unix" in meta["volatile"]


def test_simulate_grid_option(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "ex2.spec", "--mu", "0.1", "--grid", "5", "--out", tmp_path)
    assert code == 0
    assert len(read_csv(tmp_path / "ex2_mu0.1_trajectory.csv")) == 1 + 11 * 5


def test_missing_spec_exits_2_with_path(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", tmp_path / "nope.spec", "--mu", "0.1", "--out", tmp_path)
    assert code == 2
    payload = json.loads(err)
    assert payload["path"].endswith("nope.spec") and payload["exit_code"] == 2


def test_mu_zero_points_to_reduce(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "ex1.spec", "--mu", "0", "--out", tmp_path)
    assert code == 2 and "reduce" in json.loads(err)["message"]


@pytest.mark.parametrize("mu", ["0.03,0.05", "-1", "abc", "0.1,0.1"])
def test_bad_ladders_are_usage_errors(mu, tmp_path, capsys):
    code, _, _ = run(capsys, "study", "ex1.spec", "--mu", mu, "--out", tmp_path)
    assert code == 2


def test_bad_format_and_tolerance(tmp_path, capsys):
    assert run(capsys, "reduce", "ex2.spec", "--format", "xml", "--out", tmp_path)[0] == 2
    assert run(capsys, "reduce", "ex2.spec", "--rtol", "0", "--out", tmp_path)[0] == 2


def test_spec_syntax_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text(NO_ROOT.replace("z = -z", "z = -z +"))
    code, _, err = run(capsys, "reduce", bad, "--out", tmp_path)
    assert code == 2 and json.loads(err)["error"] == "SpecFileError"


def test_reduce_without_root_exits_2(tmp_path, capsys):
    spec = tmp_path / "noroot.spec"
    spec.write_text(NO_ROOT)
    assert run(capsys, "reduce", spec, "--out", tmp_path)[0] == 2


def test_reduce_ex11(tmp_path, capsys):
    code, _, _ = run(capsys, "reduce", "ex11.spec", "--out", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "ex11_reduced.csv")
    assert rows[0] == ["t", "zbar1", "ybar1", "segment_id"]
    for r in rows[1:]:
        t, z, y, seg = float(r[0]), float(r[1]), float(r[2]), int(r[3])
        right = seg > 0 and abs(t - seg / 3) < 1e-12
        assert y == pytest.approx(ex11_reduced(t, right=right), rel=1e-8)
        assert abs(z) <= 1e-12
    diag = json.loads((tmp_path / "ex11_reduced.json").read_text())
    assert diag["root_gaps"] == [0.0] * 5 and diag["isolation"]["isolated"]


def test_reduce_ex2_constant_root(tmp_path, capsys):
    assert run(capsys, "reduce", "ex2.spec", "--out", tmp_path)[0] == 0
    rows = read_csv(tmp_path / "ex2_reduced.csv")
    assert all(float(r[1]) == 0.0 for r in rows[1:])
    diag = json.loads((tmp_path / "ex2_reduced.json").read_text())
    assert max(diag["impulse_residuals"]) <= 1e-12


def test_newton_failure_exits_3_with_iterate(tmp_path, capsys):
    spec = tmp_path / "rootless.spec"
    spec.write_text(NO_ROOT.replace("z = -z", "z = -(z^2 + 1)") + "\n[root]\nz = 0.5\n")
    code, _, err = run(capsys, "reduce", spec, "--out", tmp_path)
    payload = json.loads(err)
    assert code == 3 and "last_iterate" in payload


def test_blow_up_exits_3(tmp_path, capsys):
    spec = tmp_path / "blow.spec"
    spec.write_text(NO_ROOT.replace("z = -z", "z = z^2") + "\n[root]\nz = 0\n")
    code, _, err = run(capsys, "simulate", spec, "--mu", "0.1", "--out", tmp_path)
    payload = json.loads(err)
    assert code == 3 and payload["error"] == "NonFiniteState" and payload["t_last"] > 0


def test_study_ex1_table(tmp_path, capsys):
    code, out, _ = run(capsys, "study", "ex1.spec", "--mu", "0.07,0.05,0.03", "--out", tmp_path)
    assert code == 0 and "empirical order" in out
    rows = read_csv(tmp_path / "ex1_study.csv")
    assert len(rows) == 4
    d = [float(r[1]) for r in rows[1:]]
    assert d[2] < d[1] < d[0]
    body = json.loads((tmp_path / "ex1_study.json").read_text())
    assert body["complete"] and body["impulse_limit"] == "zero" and body["report"]["mode"] == "single"


def test_study_empty_window_warns(tmp_path, capsys):
    code, _, err = run(capsys, "study", "ex2.spec", "--mu", "0.05", "--mode", "multi", "--out", tmp_path)
    assert code == 0 and "--width" in err


def test_layers_ex2(tmp_path, capsys):
    code, out, _ = run(capsys, "layers", "ex2.spec", "--mu", "0.05", "--eps", "0.1", "--out", tmp_path)
    assert code == 0 and "11 layers" in out
    assert len(read_csv(tmp_path / "ex2_layers.csv")) == 12
    body = json.loads((tmp_path / "ex2_layers.json").read_text())
    assert len(body["runs"][0]["report"]["layers"]) == 11 and body["scaling"] is None


def test_layers_pair_writes_scaling(tmp_path, capsys):
    code, _, _ = run(capsys, "layers", "ex1.spec", "--mu", "0.06,0.03", "--out", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "ex1_scaling.csv")
    assert len(rows) == 2 and 1.5 <= float(rows[1][3]) <= 2.5


def test_unclosed_layer_exits_3_and_keeps_partial_results(tmp_path, capsys):
    spec = tmp_path / "grow.spec"
    spec.write_text(NO_ROOT.replace("z = -z", "z = z") + "\n[root]\nz = 0\n")
    code, _, err = run(capsys, "layers", spec, "--mu", "0.1", "--out", tmp_path)
    payload = json.loads(err)
    assert code == 3 and payload["open_interval"][0] == 0.0
    assert (tmp_path / "grow_layers_meta.json").exists()


def test_check_ex2(tmp_path, capsys):
    code, out, _ = run(capsys, "check", "ex2.spec", "--out", tmp_path)
    assert code == 0 and "C1 lyapunov: pass" in out
    body = json.loads((tmp_path / "ex2_check.json").read_text())
    status = {c["id"]: c["status"] for c in body["conditions"]}
    assert status["lyapunov"] == "pass" and status["attraction"] == "pass"
    assert body["impulse_limit"]["classification"] == "finite"
    assert body["impulse_limit"]["I0"][0] == pytest.approx(1.1, abs=1e-3)


def test_check_strict_failure_exits_4(tmp_path, capsys):
    spec = tmp_path / "unstable.spec"
    spec.write_text(NO_ROOT.replace("z = -z", "z = z") + "\n[root]\nz = 0\n\n[lyapunov]\nV = z^2\n")
    assert run(capsys, "check", spec, "--out", tmp_path)[0] == 0
    assert run(capsys, "check", spec, "--strict", "--out", tmp_path)[0] == 4


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert run(capsys, "reduce", "ex2.spec")[0] == 0
    assert (tmp_path / "env" / "ex2_reduced.csv").exists()
    # the flag wins over the environment
    assert run(capsys, "reduce", "ex2.spec", "--out", tmp_path / "flag")[0] == 0
    assert (tmp_path / "flag" / "ex2_reduced.csv").exists()
    monkeypatch.delenv(OUT_ENV)
    assert run(capsys, "reduce", "ex2.spec")[0] == 0
    assert (tmp_path / DEFAULT_OUT / "ex2_reduced.csv").exists()


def test_format_selects_files(tmp_path, capsys):
    assert run(capsys, "reduce", "ex2.spec", "--format", "json", "--out", tmp_path)[0] == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["ex2_reduced.json", "ex2_reduced_meta.json"]


def test_simulate_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "simulate", "ex2.spec", "--mu", "0.05", "--out", tmp_path / d)[0] == 0
    for name in ("ex2_mu0.05_trajectory.csv", "ex2_mu0.05_jumps.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ta = np.loadtxt(tmp_path / "a" / "ex2_mu0.05_trajectory.csv", delimiter=",", skiprows=1)
    assert ta.shape[1] == 3
