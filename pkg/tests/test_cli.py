import subprocess
import sys

import numpy as np
import pytest

from uffggc import budget, cli
from uffggc.compensation import ConvergenceError, SWEEP_COLUMNS
from uffggc.dynamics import ModelViolationError

FAST = "[run]\nchi_steps = 4\n"


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.ini"
    p.write_text(FAST)
    return str(p)


def _rows(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [list(map(float, ln.split(","))) for ln in lines[1:]]


def test_shifts_to_stdout(capsys):
    assert cli.main(["shifts", "table1", "--chi-steps", "4", "-o", "-"]) == 0
    header, rows = _rows(capsys.readouterr().out)
    assert header == list(SWEEP_COLUMNS)
    assert len(rows) == 4
    assert [r[0] for r in rows] == pytest.approx(np.arange(4) * np.pi / 2)


def test_shifts_deterministic_files(tmp_path, fast_config, monkeypatch, capsys):
    monkeypatch.setenv("UFFGGC_OUTPUT_DIR", str(tmp_path / "a"))
    assert cli.main(["shifts", fast_config]) == 0
    monkeypatch.setenv("UFFGGC_OUTPUT_DIR", str(tmp_path / "b"))
    assert cli.main(["shifts", fast_config]) == 0
    a = (tmp_path / "a" / "shifts.csv").read_bytes()
    assert a == (tmp_path / "b" / "shifts.csv").read_bytes()
    assert str(tmp_path / "b" / "shifts.csv") in capsys.readouterr().out


def test_circular_shifts_only_even_harmonics(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[orbit]\nellipticity = 0\n")
    assert cli.main(["shifts", str(p), "--chi-steps", "16", "-o", "-"]) == 0
    header, rows = _rows(capsys.readouterr().out)
    data = np.array(rows)[:, 1:5]
    spec = np.abs(np.fft.rfft(data, axis=0)) / 16
    scale = np.max(np.abs(data))
    assert np.max(np.delete(spec, [0, 2], axis=0)) < 1e-2 * scale


def test_budget_outputs(capsys):
    assert cli.main(["budget", "table1", "--uncompensated", "-o", "-"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "term,coefficient,magnitude,harmonic"
    total = float(next(ln for ln in lines if ln.startswith("total_linear")).split(",")[2])
    assert total == pytest.approx(4.93e-11, rel=0.01)


def test_budget_zero_uncertainties(tmp_path, capsys):
    p = tmp_path / "z.ini"
    p.write_text(
        "[control]\ndelta_r0 = 0\ndelta_v0 = 0\ndelta_Omega = 0\ndelta_gamma = 0\ndelta_theta = 0\ndelta_f = 0\n"
    )
    assert cli.main(["budget", str(p), "-o", "-"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("total_linear,,0,")


def test_integrate_small_run(monkeypatch, capsys):
    monkeypatch.setattr(budget, "ledger_totals", lambda m, chis, c, w=None: np.full(len(chis), 1e-13))
    assert cli.main(["integrate", "table1", "--months", "0.01", "--chi-steps", "8", "--points", "20", "-o", "-"]) == 0
    header, rows = _rows(capsys.readouterr().out)
    assert header == ["tau_s", "delta_eta_sys", "delta_eta_sys_uncompensated", "sigma_eta_stat"]
    assert 2 <= len(rows) <= 20
    assert rows[0][0] == 10.0


def test_verify_shots(capsys):
    assert cli.main(["verify-shots", "table1", "--target-r", "1e-9", "--target-v", "1e-9"]) == 0
    assert capsys.readouterr().out.strip() == "500000"
    assert cli.main(["verify-shots", "table1", "--target-r", "1e-6", "--target-v", "1e-6"]) == 0
    assert capsys.readouterr().out.strip() == "1"
    assert cli.main(["verify-shots", "table1", "--target-r", "0", "--target-v", "1e-6"]) == 2


def test_config_errors_exit_2(tmp_path, capsys):
    assert cli.main(["shifts", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[orbit]\nbogus = 1\n")
    assert cli.main(["budget", str(bad)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["shifts", "table1", "--chi-steps", "0"]) == 2
    assert cli.main(["budget", "table1", "--chi", "nan"]) == 2


def test_solver_failure_exit_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise ConvergenceError("no convergence", residual=np.ones(4), shifts=np.zeros(4), chi=0.5)

    monkeypatch.setattr(cli, "shifts_sweep", boom)
    assert cli.main(["shifts", "table1", "-o", "-"]) == 3
    assert "solver failure" in capsys.readouterr().err


def test_model_violation_exit_4(monkeypatch):
    def boom(*a, **k):
        raise ModelViolationError("out of plane")

    monkeypatch.setattr(cli, "ggc_residual_budget", boom)
    assert cli.main(["budget", "table1", "-o", "-"]) == 4


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "uffggc", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip().startswith("uffggc ")
