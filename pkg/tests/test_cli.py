import json
import subprocess
import sys

import pytest

from chargepoly import cli

COMMANDS = ["single-site", "partition", "free-energy", "critical-curve", "silt", "wsaw",
            "rate-function", "saw-count", "bridge", "range-probe", "check"]


def run(tmp_path, *argv, name="out.jsonl"):
    out = tmp_path / name
    code = cli.dispatch([*argv, "--out", str(out)])
    lines = out.read_text().splitlines() if out.exists() else []
    return code, lines


def test_expected_q_example(tmp_path):
    code, lines = run(tmp_path, "silt", "expected-q", "--d", "2", "--n", "4")
    assert code == 0
    rec = json.loads(lines[0])
    assert rec["result"]["value"] == 5.0
    assert rec["config"]["n"] == 4 and "version" in rec


def test_symmetric_unit_bound_example(tmp_path):
    code, lines = run(tmp_path, "check", "symmetric-unit-bound", "--law", "gaussian",
                      "--delta-grid", "0:3:0.1", "--lmax", "1000")
    assert code == 0
    assert json.loads(lines[0])["result"]["passed"] is True


def test_wsaw_rerun_bit_identical(tmp_path):
    argv = ["wsaw", "--d", "3", "--u", "1e-3", "--ladder", "64:256", "--samples", "2e3", "--seed", "7"]
    _, a = run(tmp_path, *argv, name="a.jsonl")
    _, b = run(tmp_path, *argv, name="b.jsonl")
    assert a == b and len(a) == 1


def test_echoed_config_reproduces(tmp_path):
    _, a = run(tmp_path, "partition", "--law", "rademacher", "--delta", "0.3", "--beta", "0.2",
               "--d", "2", "--n", "20", "--method", "mc", "--samples", "2000", "--seed", "3",
               name="a.jsonl")
    cfg = json.loads(a[0])["config"]
    assert cfg["seed"] == 3 and cfg["samples"] == 2000
    _, b = run(tmp_path, "partition", "--law", "rademacher", "--delta", "0.3", "--beta", "0.2",
               "--d", "2", "--n", "20", "--method", "mc", "--samples", "2000", "--seed", "3",
               name="b.jsonl")
    assert json.loads(a[0])["result"] == json.loads(b[0])["result"]


def test_validation_exit_codes(tmp_path):
    assert cli.dispatch(["wsaw", "--d", "3", "--u", "1e-3", "--ladder", "64:128"]) == 2
    assert cli.dispatch(["silt", "expected-q", "--d", "2", "--n", "4", "--bogus"]) == 2
    assert cli.dispatch(["silt", "expected-q", "--d", "0", "--n", "4"]) == 2
    assert cli.dispatch(["frobnicate"]) == 2


def test_budget_exit_code(tmp_path):
    code, _ = run(tmp_path, "bridge", "probability", "--d", "2", "--ladder", "4096",
                  "--method", "exact")
    assert code == 3


def test_violation_exit_code(tmp_path):
    code, lines = run(tmp_path, "check", "superadditivity", "--law", "gaussian", "--delta", "1",
                      "--beta", "0.01", "--lmax", "50")
    assert code == 1
    assert json.loads(lines[0])["result"]["passed"] is False


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# expected local time\nd = 2\nn = 6\n")
    code, lines = run(tmp_path, "silt", "expected-q", "--config", str(cfg), "--n", "4")
    assert code == 0
    assert json.loads(lines[0])["result"]["value"] == 5.0
    bad = tmp_path / "bad.cfg"
    bad.write_text("d 2\n")
    assert cli.dispatch(["silt", "expected-q", "--config", str(bad)]) == 2


def test_env_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "runs"))
    assert cli.dispatch(["saw-count", "--d", "2", "--n", "4"]) == 0
    rec = json.loads((tmp_path / "runs" / "saw-count.jsonl").read_text())
    assert rec["result"]["counts"][:4] == [4, 12, 36, 100]


def test_csv_output(tmp_path):
    code, lines = run(tmp_path, "single-site", "--law", "gaussian", "--delta", "0.5", "--beta", "0.1",
                      "--lmax", "5", "--csv", name="t.csv")
    assert code == 0
    assert lines[0] == "ell,log_g_star,mode,err_bound" and len(lines) == 7  # ell = 0..5


@pytest.mark.parametrize("command", COMMANDS)
def test_help_lists_flags(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "--out" in text and "--csv" in text


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "chargepoly", "silt", "expected-q", "--d", "2", "--n", "4"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["result"]["value"] == 5.0
