import csv
import json
import subprocess
import sys

import pytest

from nlstokes.cli import main
from nlstokes.fields import random_field, write_field_json


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_solve_outputs(tmp_path, capsys):
    code, out = run(tmp_path, "solve", "-d", "2", "--delta", "0.2", "-N", "3", "--case", "random")
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"solution.json", "samples.csv", "manifest.json"}
    sol = json.loads((out / "solution.json").read_text())
    assert sol["variant"] == "nonlocal" and sol["N"] == 3 and sol["residual_norm"] < 1e-10
    rows = list(csv.reader((out / "samples.csv").open()))
    assert rows[0] == ["x1", "x2", "u1", "u2", "p"] and len(rows) == 8 ** 2 + 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["delta"] == 0.2 and "residual_norm" in man
    assert "residual" in capsys.readouterr().out


def test_solve_with_field_files(tmp_path):
    f = random_field(1, 2, 1.0, components=3, d=3)
    write_field_json(f, tmp_path / "f.json")
    cfg = {"d": 3, "N": 2, "f": str(tmp_path / "f.json"), "variant": "local", "samples": 6}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    code, out = run(tmp_path, "solve", "--config", str(tmp_path / "run.json"))
    assert code == 0
    assert json.loads((out / "solution.json").read_text())["variant"] == "local"


def test_sweep_delta(tmp_path, capsys):
    code, out = run(tmp_path, "sweep-delta", "--case", "random", "-N", "4", "--threads", "2")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and 1.8 <= summary["fits"]["u_L2"]["rate"] <= 2.2
    text = (out / "report.csv").read_text()
    assert text.startswith("axis_value,norm_name,error\n")
    assert "PASS u_L2" in capsys.readouterr().out


def test_sweep_delta_thread_independent(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["sweep-delta", "--case", "random", "-N", "4", "--threads", "1", "--out", str(a)]) == 0
    assert main(["sweep-delta", "--case", "random", "-N", "4", "--threads", "3", "--out", str(b)]) == 0
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()


def test_two_deltas_warn(tmp_path, capsys):
    code, out = run(tmp_path, "sweep-delta", "--deltas", "0.2", "0.1", "-N", "4")
    assert code == 0
    assert "warning" in capsys.readouterr().err


def test_sweep_n_and_ac(tmp_path):
    code, out = run(tmp_path, "sweep-n", "--Ns", "4", "8", "16")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["checks"]["u_L2"]["rate"] >= 2
    code, out = run(tmp_path, "ac-diagram", "--Ns", "4", "8", "16", "32", "--N-fixed", "8")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["checks"]["triangle"]["pass"]


def test_check_symbols(tmp_path):
    code, out = run(tmp_path, "check-symbols", "--xi-max", "10", "--deltas", "0.1", "0.5")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["n_failures"] == 0


def test_check_symbols_corrupted(tmp_path):
    cfg = {"kernels": {"omega": {"family": "constant", "params": {"amplitude": 3.0}}}}
    (tmp_path / "bad.json").write_text(json.dumps(cfg))
    code, out = run(tmp_path, "check-symbols", "--config", str(tmp_path / "bad.json"), "--xi-max", "8")
    assert code == 1
    assert json.loads((out / "summary.json").read_text())["n_failures"] > 0


@pytest.mark.parametrize("args, code", [
    (["solve", "--delta", "1.5"], 2),
    (["solve", "-d", "4"], 2),
    (["sweep-delta", "--deltas", "0.1", "-0.2"], 2),
    (["solve", "--variant", "local", "--case", "vortex"], 2),
])
def test_config_errors(tmp_path, capsys, args, code):
    assert run(tmp_path, *args)[0] == code
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == code
    assert (tmp_path / "out" / "error.json").exists()


def test_unnormalized_kernel_rejected(tmp_path):
    cfg = {"kernels": {"omega": {"family": "constant", "params": {"amplitude": 3.0}}}}
    (tmp_path / "bad.json").write_text(json.dumps(cfg))
    assert run(tmp_path, "solve", "--config", str(tmp_path / "bad.json"))[0] == 2


def test_unknown_config_key(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"dimension": 2}))
    assert run(tmp_path, "solve", "--config", str(tmp_path / "c.json"))[0] == 2


def test_nonzero_mean_data(tmp_path):
    doc = {"d": 2, "components": 2, "N": 1, "coeffs": [{"xi": [0, 0], "re": [1.0, 0.0], "im": [0.0, 0.0]}]}
    (tmp_path / "f.json").write_text(json.dumps(doc))
    (tmp_path / "c.json").write_text(json.dumps({"f": str(tmp_path / "f.json"), "N": 1}))
    assert run(tmp_path, "solve", "--config", str(tmp_path / "c.json"))[0] == 3


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nlstokes", "solve", "-N", "2", "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "nlstokes", "--version"], capture_output=True, text=True)
    assert res.stdout.strip().endswith("0.1.0")
