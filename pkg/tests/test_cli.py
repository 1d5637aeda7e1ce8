import json

import pytest

from cli import build_parser, run_cli
from services.results import CSV_COLUMNS

SMALL_GRID = ["--set", "grid.m=256", "--set", "grid.k_max=16"]
SMALL_ORACLE = [
    "--set",
    "oracle.m=128",
    "--set",
    "oracle.k_max=16",
    "--set",
    "oracle.max_step=0.05",
]
UNCALIBRATED = ["--set", "run.uncalibrated=true"]


@pytest.fixture(autouse=True)
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PHOTON_GATE_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("PHOTON_GATE_THREADS", "2")
    monkeypatch.delenv("PHOTON_GATE_CONFIG", raising=False)
    monkeypatch.delenv("PHOTON_GATE_LOG_LEVEL", raising=False)
    return tmp_path


def test_every_command_module_registers():
    parser = build_parser()
    subcommands = parser._subparsers._group_actions[0].choices
    assert set(subcommands) == {"simulate", "optimize", "scan", "calibrate", "oracle-check"}


def test_simulate_text_output(capsys):
    code = run_cli(["simulate", "--n", "2", "--output", "text", *SMALL_GRID, *UNCALIBRATED])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("n_rounds = 2\n")
    assert "round.2 = " in out


def test_simulate_csv_to_file(workspace):
    code = run_cli(
        ["simulate", "--n", "1", "--no-trap", "--out", "results/one.csv", *SMALL_GRID]
        + UNCALIBRATED
    )
    assert code == 0
    lines = (workspace / "results" / "one.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].startswith("1,off,1,2,,,")


def test_simulate_without_calibration_fails(capsys):
    assert run_cli(["simulate", *SMALL_GRID]) == 1
    assert "run `calibrate` first" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--set", "grid.size=12"],
        ["simulate", "--set", "grid.m=many"],
        ["simulate", "--n", "0", *UNCALIBRATED],
        ["simulate", "--config", "missing.conf"],
        ["transmogrify"],
    ],
)
def test_usage_errors_exit_with_two(argv):
    assert run_cli(argv) == 2


def test_bad_log_level_exits_with_two(monkeypatch, capsys):
    monkeypatch.setenv("PHOTON_GATE_LOG_LEVEL", "chatty")
    assert run_cli(["simulate", *UNCALIBRATED]) == 2
    assert "PHOTON_GATE_LOG_LEVEL" in capsys.readouterr().err


def test_config_file_then_set_then_flags(workspace, capsys):
    (workspace / "run.conf").write_text("run.n_rounds = 4\ngrid.m = 128\n", encoding="utf-8")
    code = run_cli(
        ["simulate", "--config", "run.conf", "--set", "run.n_rounds=3", "--n", "1"]
        + ["--set", "grid.k_max=16", "--output", "text", *UNCALIBRATED]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "n_rounds = 1\n" in out


def test_optimize_single_row(capsys):
    code = run_cli(
        ["optimize", "--n", "1", "--no-trap", "--sigma-k", "0.6", *UNCALIBRATED]
        + ["--set", "grid.m=64", "--set", "grid.k_max=8"]
        + ["--set", "optimizer.restarts=1", "--set", "optimizer.max_evals=8"]
        + ["--set", "optimizer.sigma_k_bounds=0.3,0.9"]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("1,off,")


def test_scan_flags_narrow_the_sweep(capsys):
    code = run_cli(
        ["scan", "--n", "2", "--trap", "--sigma-k", "0.6", "--output", "text", *UNCALIBRATED]
        + ["--set", "grid.m=64", "--set", "grid.k_max=8"]
        + ["--set", "optimizer.restarts=1", "--set", "optimizer.max_evals=8"]
        + ["--set", "optimizer.sigma_k_bounds=0.3,0.9"]
        + ["--set", "optimizer.lambda2_bounds=-0.5,0.5"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("[n=") == 1
    assert out.startswith("[n=2 trap=on]\n")


def test_calibrate_then_simulate_with_the_stored_kernel(workspace, capsys):
    assert run_cli(["calibrate", *SMALL_ORACLE]) == 0
    stored = json.loads((workspace / "kernel.json").read_text(encoding="utf-8"))
    assert stored["shell"] == "pole"
    assert stored["grid_m"] in (128, 256)
    capsys.readouterr()

    assert run_cli(["simulate", "--n", "1", "--output", "text", *SMALL_GRID]) == 0
    assert "fidelity = " in capsys.readouterr().out


def test_oracle_check_exit_code_follows_the_table(capsys):
    code = run_cli(
        ["oracle-check", *SMALL_ORACLE, *UNCALIBRATED]
        + ["--set", "oracle.sigma_values=1", "--set", "oracle.delta_values=2"]
    )
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "sigma_k,delta,distance,linear_distance,oracle_norm,schmidt_number,passed"
    assert len(lines) == 2
    passed = lines[1].split(",")[-1]
    assert code == (0 if passed == "true" else 1)


OPTIMIZE_ONE = (
    ["optimize", "--n", "1", "--no-trap", "--sigma-k", "0.6", *UNCALIBRATED]
    + ["--set", "grid.m=64", "--set", "grid.k_max=8"]
    + ["--set", "optimizer.restarts=2", "--set", "optimizer.max_evals=12"]
    + ["--set", "optimizer.sigma_k_bounds=0.3,0.9"]
)


def _csv_record(path):
    header, row = path.read_text(encoding="utf-8").splitlines()
    return dict(zip(header.split(","), row.split(",")))


def test_repeated_runs_write_identical_bytes(workspace):
    for name in ("first", "second"):
        assert run_cli(["calibrate", *SMALL_ORACLE, "--set", f"run.kernel_file={name}.json"]) == 0
        assert run_cli([*OPTIMIZE_ONE, "--out", f"{name}.csv"]) == 0
    assert (workspace / "first.json").read_bytes() == (workspace / "second.json").read_bytes()
    assert (workspace / "first.csv").read_bytes() == (workspace / "second.csv").read_bytes()


def test_simulating_an_optimized_row_reproduces_its_metrics(workspace):
    assert run_cli([*OPTIMIZE_ONE, "--out", "best.csv"]) == 0
    best = _csv_record(workspace / "best.csv")
    code = run_cli(
        ["simulate", "--n", "1", "--no-trap", "--out", "again.csv", *UNCALIBRATED]
        + ["--sigma-k", best["sigma_k"], "--delta", best["delta"]]
        + ["--set", "grid.m=64", "--set", "grid.k_max=8"]
    )
    assert code == 0
    again = _csv_record(workspace / "again.csv")
    assert float(again["fidelity"]) == pytest.approx(float(best["fidelity"]), abs=1e-8)
    assert float(again["p_fail"]) == pytest.approx(float(best["p_fail"]), abs=1e-8)
