import json
import math
import subprocess
import sys

import pytest

from linamp.cli import apply_overrides, dumps, main, parse_grid


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def records_file(tmp_path, rows):
    path = tmp_path / "records.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return str(path)


NOISY = [
    {"label": "rho1", "in_amp": [0, 0], "in_n": 0, "out_amp": [0, 0], "out_n": 7.5},
    {"label": "rho2", "in_amp": [1, 0], "in_n": 1, "out_amp": [2, 0], "out_n": 23.5},
]


def test_helpers():
    assert parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("1,2.5") == [1.0, 2.5]
    cfg = apply_overrides({"a": {"b": 1}}, ["a.b=2.5", "c=\"x\"", "d=vacuum"])
    assert cfg == {"a": {"b": 2.5}, "c": "x", "d": "vacuum"}
    assert json.loads(dumps({"x": math.nan, "y": 0.1})) == {"x": None, "y": 0.1}


def test_evolve_csv(tmp_path, capsys):
    cfg = write(tmp_path / "ev.json", {"amplifier": {"kind": "A1", "kappa_up": 2.0, "kappa_down": 1.0},
                                       "state": {"kind": "coherent", "alpha": 1.0},
                                       "times": [0.0, 0.5], "dim": 200})
    code, out, _ = run(["evolve", cfg], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,re_amp,im_amp,n,n2,a2norm,tail_mass"
    row = [float(x) for x in lines[2].split(",")]
    assert row[3] == pytest.approx(math.exp(0.5) + 2 * (math.exp(0.5) - 1), rel=1e-7)
    assert row[1] == pytest.approx(math.exp(0.25), rel=1e-7)


def test_set_overrides_and_output_file(tmp_path, capsys):
    cfg = write(tmp_path / "ev.json", {"amplifier": {"kind": "A2", "gamma": 1.0}, "state": {"kind": "vacuum"},
                                       "times": [0.0], "dim": 50})
    out_path = tmp_path / "out.csv"
    code, out, _ = run(["evolve", cfg, "--set", "times=[0.05]", "--set", "dim=2000",
                        "--set", f"output=\"{out_path}\""], capsys)
    assert code == 0 and out == ""
    n = float(out_path.read_text().splitlines()[1].split(",")[3])
    assert n == pytest.approx((math.exp(0.2) - 1) / 2, rel=1e-7)


def test_config_errors_exit_2(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert run(["evolve", str(empty)], capsys)[0] == 2
    bad = write(tmp_path / "bad.json", {"amplifier": {"kind": "A2", "gamma": 1.0}, "state": {"kind": "vacuum"},
                                        "times": [0.1], "dim": 50, "colour": 1})
    code, _, err = run(["evolve", bad], capsys)
    assert code == 2 and json.loads(err)["error"] == "ConfigError"
    assert run(["evolve", str(tmp_path / "missing.json")], capsys)[0] == 2
    assert run(["no-such-command"], capsys)[0] == 2
    domain = write(tmp_path / "d.json", {"amplifier": {"kind": "A1", "kappa_up": 1.0, "kappa_down": 1.0},
                                         "state": {"kind": "vacuum"}, "times": [0.1], "dim": 50})
    assert run(["evolve", domain], capsys)[0] == 2


def test_truncation_exit_3(tmp_path, capsys):
    cfg = write(tmp_path / "ev.json", {"amplifier": {"kind": "A2", "gamma": 1.0}, "state": {"kind": "vacuum"},
                                       "times": [0.7], "dim": 20})
    code, out, err = run(["evolve", cfg], capsys)
    payload = json.loads(err)
    assert code == 3 and out == ""
    assert payload["error"] == "TruncationError" and payload["dim"] == 20 and payload["tail_mass"] >= 1e-6


def test_certify_verdicts(tmp_path, capsys):
    code, out, _ = run(["certify", records_file(tmp_path, NOISY)], capsys)
    result = json.loads(out)
    assert code == 4 and result["verdict"] == "NOT_SIMULABLE"
    assert result["g_est"] == pytest.approx(2.0) and result["spread"] == pytest.approx(4.0)
    paramp = [{"in_amp": 0, "in_n": 0, "out_amp": 0, "out_n": 3.0},
              {"in_amp": 1, "in_n": 1, "out_amp": 2, "out_n": 7.0}]
    code, out, _ = run(["certify", records_file(tmp_path, paramp)], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "SIMULABLE_NECESSARY"
    code, out, _ = run(["certify", records_file(tmp_path, NOISY[1:]), "--g", "1.5"], capsys)
    assert code == 3 and json.loads(out)["verdict"] == "INCONSISTENT_GAIN"


def test_certify_bad_records(tmp_path, capsys):
    path = tmp_path / "r.jsonl"
    path.write_text("")
    assert run(["certify", str(path)], capsys)[0] == 2
    path.write_text('{"in_amp": 0, "in_n": -1, "out_amp": 0, "out_n": 1}\n')
    assert run(["certify", str(path)], capsys)[0] == 2
    code, _, err = run(["certify", records_file(tmp_path, NOISY[:1])], capsys)
    assert code == 3 and json.loads(err)["error"] == "NoAmplitudeRecord"


def test_scan_region_golden_header(tmp_path, capsys):
    code, out, _ = run(["scan-region", "--gamma", "1", "--t", "0.6931471805599453", "--grid", "0:2:1",
                        "--bbdag", "1,2"], capsys)
    lines = out.strip().splitlines()
    assert code == 0
    assert lines[0] == "n_in,lb,paramp_1,paramp_2,n_star_1,n_star_2"
    assert len(lines) == 4
    row = [float(x) for x in lines[2].split(",")]
    assert row[1] == pytest.approx(85.0)
    assert row[2] == pytest.approx(7.0) and row[3] == pytest.approx(10.0)


def test_scan_region_simulation_column(tmp_path, capsys):
    code, out, _ = run(["scan-region", "--gamma", "1", "--t", "0.05", "--grid", "0,1", "--bbdag", "1",
                        "--dim", "3000", "--tail-tol", "1e-3"], capsys)
    assert code == 0
    code, out, _ = run(["scan-region", "--gamma", "1", "--t", "0.05", "--grid", "0,1", "--bbdag", "1",
                        "--simulate", "--dim", "3000", "--tail-tol", "1e-3"], capsys)
    lines = out.strip().splitlines()
    assert lines[0].endswith(",sim_n,sim_tail_mass")
    for line in lines[1:]:
        vals = [float(x) for x in line.split(",")]
        assert vals[-2] >= vals[1]
    assert run(["scan-region", "--gamma", "1", "--t", "0.05", "--grid", "0.5", "--bbdag", "1",
                "--simulate"], capsys)[0] == 2


def test_trajectories_are_deterministic(tmp_path, capsys):
    doc = {"amplifier": {"kind": "A2", "gamma": 1.0}, "state": {"kind": "vacuum"}, "t": 0.1, "dim": 200,
           "n_traj": 100, "seed": 2024, "jump_log": str(tmp_path / "jumps.jsonl")}
    cfg = write(tmp_path / "tr.json", doc)
    code, first, _ = run(["trajectories", cfg], capsys)
    log1 = (tmp_path / "jumps.jsonl").read_text()
    code2, second, _ = run(["trajectories", cfg, "--set", "workers=2"], capsys)
    assert code == code2 == 0
    assert first == second
    assert (tmp_path / "jumps.jsonl").read_text() == log1
    stats = json.loads(first)
    assert stats["n_traj"] == 100
    assert len(log1.splitlines()) == sum(stats["jump_counts"].values())


def test_phase_check_report(tmp_path, capsys):
    doc = {"amplifier": {"kind": "A2", "gamma": 1.0}, "state": {"kind": "coherent", "alpha": 1.0}, "t": 0.1,
           "dim": 300, "moment_dim": 4000, "phis": [0.0, 0.5, 1.0]}
    code, out, _ = run(["phase-check", write(tmp_path / "ph.json", doc)], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["max_residual"] <= 1e-8
    assert report["g_spread"] <= 1e-8
    for entry in report["insensitivity"]:
        assert entry["N"] == pytest.approx(report["N_reference"], rel=1e-6)


def test_predict(tmp_path, capsys):
    doc = {"amplifier": {"kind": "A2", "gamma": 1.0}, "t": 0.6931471805599453, "in_amp": 0, "in_n": 0}
    code, out, _ = run(["predict", write(tmp_path / "p.json", doc)], capsys)
    assert code == 0 and json.loads(out)["mean_n"] == pytest.approx(7.5)
    doc = {"paramp": {"G": 2.0, "sigma": {"kind": "thermal", "nbar": 1.0}}, "in_amp": 0, "in_n": 0}
    code, out, _ = run(["predict", write(tmp_path / "p.json", doc)], capsys)
    assert json.loads(out)["mean_n"] == pytest.approx(6.0)
    doc["in_n"] = -1
    assert run(["predict", write(tmp_path / "p.json", doc)], capsys)[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "linamp", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "scan-region" in proc.stdout
