import json
import shutil
import subprocess

import pytest

from rsvo.cli import main

HARD_INFEASIBLE = """\
name: stuck
relax: false
cbf: {gamma: 0.0}
u_min: [0.5, 0.5]
u_max: [1.0, 1.0]
agents:
  - {id: 1, x: [0, 0], goal: [10, 10]}
  - {id: 2, x: [10, 10], goal: [0, 0]}
"""

SHORT = """\
name: short
kind: swap
max_steps: 60
agents:
  - {id: 1, x: [0, 0], goal: [10, 10]}
  - {id: 2, x: [10, 10], goal: [0, 0]}
"""


def test_simulate_prints_report_and_writes_outputs(tmp_path, capsys):
    assert main(["simulate", "--scenario", "swap", "--steps", "40", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["scenario"] == "swap" and report["n_steps"] == 40
    assert report["slack_events"] == 0
    for name in ("trajectory.csv", "pairwise.csv", "summary.json", "scenario.yaml", "run.json"):
        assert (tmp_path / name).is_file()


def test_overrides_apply(capsys):
    assert main(["simulate", "--scenario", "swap", "--steps", "5", "--dt", "0.02", "--gamma", "2", "--symmetric"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mode"] == "symmetric" and report["n_steps"] == 5


def test_metrics_recomputes_summary(tmp_path, capsys):
    assert main(["simulate", "--scenario", "swap", "--steps", "30", "--out", str(tmp_path / "run")]) == 0
    before = (tmp_path / "run" / "summary.json").read_bytes()
    (tmp_path / "run" / "summary.json").unlink()
    capsys.readouterr()
    assert main(["metrics", "--in", str(tmp_path)]) == 0
    assert (tmp_path / "run" / "summary.json").read_bytes() == before
    assert "run" in json.loads(capsys.readouterr().out)


def test_sweep_writes_tree(tmp_path, capsys):
    cfg = tmp_path / "short.yaml"
    cfg.write_text(SHORT)
    out = tmp_path / "out"
    assert main(["sweep", "--scenario", str(cfg), "--seeds", "2", "--theta-min", "1", "--theta-max", "10",
                 "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["seeds"] == [0, 1]
    assert sorted(p.name for p in out.iterdir()) == ["seed_0", "seed_1", "sweep_summary.json"]


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["simulate", "--scenario", "nope"],
    ["simulate", "--scenario", "swap", "--dt", "-1"],
    ["sweep", "--scenario", "swap", "--seeds", "0", "--theta-min", "1", "--theta-max", "2", "--out", "x"],
    ["sweep", "--scenario", "swap", "--seeds", "1", "--theta-min", "3", "--theta-max", "2", "--out", "x"],
    ["frobnicate"],
])
def test_invalid_input_exits_1(argv, capsys):
    assert _exit_code(argv) == 1


def test_bad_config_file_exits_1(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: x\nagents:\n  - {id: 1, x: [0, 0], goal: [1, 1], theta: -1}\n")
    assert _exit_code(["simulate", "--scenario", str(p)]) == 1
    p.write_text("agents: [\n")
    assert _exit_code(["simulate", "--scenario", str(p)]) == 1


def test_runtime_failure_exits_2(tmp_path, capsys):
    p = tmp_path / "stuck.yaml"
    p.write_text(HARD_INFEASIBLE)
    assert _exit_code(["simulate", "--scenario", str(p)]) == 2
    assert "no safe control" in capsys.readouterr().err
    assert _exit_code(["metrics", "--in", str(tmp_path)]) == 1
    (tmp_path / "run").mkdir()
    (tmp_path / "run" / "trajectory.csv").write_text("garbage\n")
    assert _exit_code(["metrics", "--in", str(tmp_path)]) == 2


def _exit_code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.skipif(shutil.which("rsvo") is None, reason="console script not installed")
def test_console_script_and_log_level(tmp_path):
    env = {"RSVO_LOG_LEVEL": "info", "PATH": "/usr/local/bin:/usr/bin:/bin"}
    res = subprocess.run(["rsvo", "simulate", "--scenario", "swap", "--steps", "3"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0
    assert "INFO" in res.stderr
    assert json.loads(res.stdout)["n_steps"] == 3
