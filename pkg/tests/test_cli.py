import json
import subprocess
import sys

import pytest

from lockbench.bench.cli import main


def test_oracle_command(capsys):
    assert main(["oracle", "--hmax", "6"]) == 0
    out = capsys.readouterr().out
    assert "7/24" in out and "1/32" in out and "0.734375" in out


def test_bandit_command(capsys):
    assert main(["bandit", "--arms", "8", "--pulls", "3", "--trials", "20000"]) == 0
    assert "exhaustive enumeration: 1/2" in capsys.readouterr().out
    assert main(["bandit", "--arms", "4", "--pulls", "4", "--trials", "10"]) == 2


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--fixtures", "8"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_symcheck_command(capsys):
    assert main(["symcheck", "--seed", "1"]) == 0
    assert capsys.readouterr().out.count("PASS") == 5


def test_sweep_and_plot_commands(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"methods": ["gc_exact"], "horizons": [5], "runs": 2, "n_eval": 50,
                               "budgets": {"gc_exact": {"N": 200}}}))
    out, svg = tmp_path / "r.csv", tmp_path / "r.svg"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert "H=5: 2/2" in capsys.readouterr().out
    assert main(["plot", "--in", str(out), "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"methods": ["gc_exact"], "horizons": [1]}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "r.csv")]) == 2
    assert "horizons[0]" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lockbench", "oracle", "--hmax", "4"], capture_output=True, text=True)
    assert res.returncode == 0 and "7/24" in res.stdout


def test_failing_check_exits_nonzero(monkeypatch):
    from lockbench.bench import cli
    from lockbench.bench.checks import CheckResult
    monkeypatch.setattr(cli, "gradcheck", lambda n, s: [CheckResult("forced", False, 1.0, 0.0)])
    assert main(["gradcheck"]) == 1
