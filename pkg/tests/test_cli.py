import csv
import io
import json
import math
import subprocess
import sys

import pytest

from sasaki_approx import cli
from sasaki_approx.cli import RunConfig, UsageError, main, parse_grid, parse_k, parse_range
from sasaki_approx.models import fubini_study
from sasaki_approx.sections import closed_form_log_norm
from sasaki_approx.verification import Check


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norms_example(capsys):
    code, out, _ = run_cli(capsys, "norms", "--model", "cylinder", "--k", "4", "--j", "-10..10", "--check-closed-form")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 21
    assert [int(r["j"]) for r in rows] == list(range(-10, 11))
    assert max(float(r["relative_error"]) for r in rows) < 1e-10
    assert list(rows[0])[:6] == ["model", "k", "j", "log_norm", "method", "tolerance"]


def test_converge_example(capsys):
    code, out, _ = run_cli(capsys, "converge", "--model", "punctured_disc", "--k", "4,8,16", "--grid", "-3:-0.5:50")
    assert code == 0
    data = json.loads(out)
    assert data["monotone"] == {"epsilon": True, "curvature": True}
    assert data["k_list"] == [4, 8, 16]
    assert len(data["grid"]) == 50


def test_epsilon_example(capsys):
    code, out, _ = run_cli(capsys, "epsilon", "--model", "fubini_study", "--k", "3", "--grid", "-2:2:9")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 9
    for r in rows:
        assert abs(float(r["epsilon"]) * math.pi / 4 - 1) < 1e-12


def test_other_commands(capsys):
    code, out, _ = run_cli(capsys, "models")
    assert code == 0 and out.count("\n") == 4
    code, out, _ = run_cli(capsys, "curvature", "--model", "punctured_disc", "--grid", "-3:-0.5:5", "--format", "json")
    data = json.loads(out)
    assert code == 0 and abs(data["eta_einstein"]["lambda"] + 6) < 1e-7
    code, out, _ = run_cli(capsys, "homothety", "--model", "cylinder", "--a", "2", "--grid", "-1:1:3")
    data = json.loads(out)
    assert code == 0 and data["structure"]["transverse_density"] == [1.0, 1.0, 1.0]


def test_model_file(tmp_path, capsys):
    path = tmp_path / "flat.model"
    path.write_text("name = flat\npotential = polynomial\ncoefficients = 0, 0, 0.5\n")
    code, out, _ = run_cli(capsys, "norms", "--model-file", str(path), "--k", "2", "--j", "-1..1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[1]["model"] == "flat"
    assert abs(float(rows[1]["log_norm"]) - 1.5 * math.log(math.pi)) < 1e-10


@pytest.mark.parametrize(
    "argv",
    [
        ["norms", "--model", "cylinder", "--k", "4"],
        ["norms", "--model", "torus", "--k", "4", "--j", "0..1"],
        ["epsilon", "--model", "cylinder", "--k", "2", "--grid", "0:1:1"],
        ["epsilon", "--model", "cylinder", "--k", "2", "--grid", "0:1"],
        ["epsilon", "--model", "punctured_disc", "--k", "2", "--grid", "-1:1:3"],
        ["homothety", "--model", "cylinder", "--a", "-1", "--grid", "0:1:2"],
        ["norms", "--model", "cylinder", "--k", "0", "--j", "0..1"],
        ["norms", "--model", "cylinder", "--k", "2", "--j", "3..1"],
        ["norms", "--model-file", "/nonexistent/file.model", "--k", "2", "--j", "0..1"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert capsys.readouterr().err


def test_numerical_failure_exits_2(capsys):
    code, _, err = run_cli(capsys, "epsilon", "--model", "punctured_disc", "--k", "8", "--grid", "-0.06:-0.05:2")
    assert code == 2
    assert "index cap" in err
    code, _, _ = run_cli(capsys, "epsilon", "--model", "punctured_disc", "--k", "1", "--grid", "-2:-1:2")
    assert code == 2


def test_verification_failure_exits_3(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(cli, "run_all", lambda workers: [Check("broken", 1.0, 0.5, False)])
    out_path = tmp_path / "verify.json"
    code, out, _ = run_cli(capsys, "verify", "-o", str(out_path))
    assert code == 3
    assert out.startswith("FAIL  broken")
    assert json.loads(out_path.read_text())["passed"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["norms", "--model", "punctured_disc", "--k", "3,7", "--j", "1..30"],
        ["epsilon", "--model", "cylinder", "--k", "3", "--grid", "-2:2:21"],
        ["converge", "--model", "fubini_study", "--k", "2,4", "--grid", "-1:1:5"],
    ],
)
def test_worker_count_does_not_change_bytes(tmp_path, capsys, argv):
    blobs = []
    for workers in ("1", "4", "4"):
        path = tmp_path / f"out{workers}.txt"
        assert main(argv + ["--workers", workers, "-o", str(path)]) == 0
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_dump_config(capsys):
    code, out, _ = run_cli(capsys, "converge", "--model", "cylinder", "--k", "1,2", "--grid", "-1:1:3",
                           "--dump-config", "--workers", "2")
    config = json.loads(out)["config"]
    assert config["command"] == "converge"
    assert config["k"] == [1, 2]
    assert config["grid"] == [-1.0, 1.0, 3]
    assert "worker_count" not in config and "output" not in config


def test_csv_float_formatting(capsys):
    _, out, _ = run_cli(capsys, "norms", "--model", "fubini_study", "--k", "2", "--j", "0..2", "--method", "closed_form")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[1]["log_norm"] == repr(closed_form_log_norm(fubini_study(), 2, 1))
    assert float(rows[1]["log_norm"]) == pytest.approx(math.log(math.pi / 6), rel=1e-15)
    assert out.endswith("\r\n")


def test_parsers():
    assert parse_grid("-3:-0.5:50") == (-3.0, -0.5, 50)
    assert parse_range("-10..10") == (-10, 10)
    assert parse_range("4") == (4, 4)
    assert parse_k("4,8,16") == (4, 8, 16)
    for bad in ("1:2", "a:b:3", "2:1:3", "0:inf:3"):
        with pytest.raises(UsageError):
            parse_grid(bad)
    with pytest.raises(UsageError):
        parse_k("4,x")
    with pytest.raises(UsageError):
        RunConfig("verify", worker_count=0)
    with pytest.raises(UsageError):
        RunConfig("verify", tolerance=-1.0)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sasaki_approx", "epsilon", "--model", "fubini_study", "--k", "1", "--grid", "0:1:2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("model,k,u,epsilon")
