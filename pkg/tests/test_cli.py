import json
import os
import subprocess
import sys

import pytest

from gibbs_partitions.cli import main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_log_beta_above_one(capsys):
    code, out, _ = run(capsys, "classify", "--energy", "log", "--beta", "1.5")
    rep = json.loads(out)
    assert code == 0
    assert {k: rep[k] for k in ("regime", "limit_shape", "reason")} == {
        "regime": "iv", "limit_shape": "none", "reason": "beta>1"}
    assert rep["version"] and rep["seed"] == 0 and rep["config"]["energy"]["kind"] == "log"


def test_classify_constant(capsys):
    rep = json.loads(run(capsys, "classify", "--energy", "const", "--c", "1")[1])
    assert (rep["regime"], rep["limit_shape"]) == ("ii", "dilog")


def test_classify_quadratic_table(capsys):
    rep = json.loads(run(capsys, "classify", "--energy", "power", "--c", "1", "--alpha", "2")[1])
    assert rep["regime"] == "supercritical" and rep["scenario"] == "S2"


def test_expect_beta_zero(capsys):
    code, out, _ = run(capsys, "expect", "--energy", "const", "--beta", "0", "--mu", "1e-3")
    row = json.loads(out)["rows"][0]
    assert code == 0
    assert abs(row["mu2_E_Mon"] / 1.6449340668482264 - 1) < 0.02
    assert set(row["E_Mon"]) == {"value", "K", "tail_bound"}


def test_shape_csv(tmp_path, capsys):
    path = tmp_path / "shape.csv"
    code, out, _ = run(capsys, "shape", "--energy", "log", "--beta", "0.5", "--grid", "0.25,0.5", "--out", str(path))
    assert code == 0 and json.loads(out)["csv"] == str(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,F_analytic"
    x, F = lines[2].split(",")
    assert float(x) == 0.5
    assert float(F) == pytest.approx(0.63462101572582863, rel=1e-15)
    assert len(F.replace(".", "").lstrip("0")) == 17


def test_sample_byte_identical(tmp_path, capsys):
    args = ["sample", "--energy", "const", "--mu", "0.05", "--samples", "300", "--seed", "12"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b and a.count("\n") == 301
    assert json.loads(a.splitlines()[0])["header"]["seed"] == 12


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("GIBBS_PARTITIONS_SEED", "77")
    assert json.loads(run(capsys, "classify")[1])["seed"] == 77
    monkeypatch.setenv("GIBBS_PARTITIONS_SEED", "x")
    code, _, err = run(capsys, "classify")
    assert code == 2 and json.loads(err)["error"] == "ConfigError"


def test_config_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "expect", "--energy", "log", "--beta", "0.5", "--mu-seq", "0.01,0.005", "--x", "0.5")
    first = json.loads(out)
    cfg = tmp_path / "report.json"
    cfg.write_text(out)
    again = json.loads(run(capsys, "expect", "--config", str(cfg))[1])
    assert again["rows"] == first["rows"] and again["config"] == first["config"]


def test_errors_are_json(tmp_path, capsys):
    code, _, err = run(capsys, "expect", "--mu", "0.1", "--mu-seq", "0.1")
    assert code == 2 and "exactly one" in json.loads(err)["message"]
    code, _, err = run(capsys, "expect", "--energy", "const", "--mu", "-0.5")
    assert code == 3 and json.loads(err)["error"] == "SeriesDivergence"
    bad = tmp_path / "bad.json"
    bad.write_text('{"energy": {"kind": "const"},\n "beta": }')
    code, _, err = run(capsys, "classify", "--config", str(bad))
    assert code == 2 and "line 2" in json.loads(err)["message"]
    code, _, err = run(capsys, "classify", "--energy", "table")
    assert code == 2


def test_converge_exit_code_and_outputs(tmp_path, capsys):
    csv_path, fig = tmp_path / "c.csv", tmp_path / "c.png"
    code, out, _ = run(capsys, "converge", "--energy", "const", "--mu-seq", "0.05,0.02", "--samples", "300",
                       "--out", str(csv_path), "--figure", str(fig))
    rep = json.loads(out)
    assert code == (0 if all(rep["verdicts"].values()) else 1)
    assert csv_path.read_text().splitlines()[0] == "mu,x,mean_F,var_F,F_analytic"
    assert fig.stat().st_size > 0


def test_bell_fails_when_verdict_fails(capsys):
    code, out, _ = run(capsys, "bell", "--masses", "100,1000", "--samples", "200")
    assert code == 1 and json.loads(out)["verdict"] == "fail"


def test_grid_parsing():
    assert list(parse_grid("lin:0:1:3")) == [0.0, 0.5, 1.0]
    assert len(parse_grid("geom:0.1:10:5")) == 5
    assert list(parse_grid("1,2")) == [1.0, 2.0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gibbs_partitions", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
