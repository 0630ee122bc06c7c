from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from neumannhole import cli
from neumannhole.errors import ConfigError, ConvergenceError
from neumannhole.experiments import CSV_COLUMNS

ROOT = Path(__file__).resolve().parents[1]
QUICK = ROOT / "configs" / "quick.json"

HEADER = ("epsilon,h,k,lambda_omega,lambda_hole,dbar,dbar_trunc_err,delta5p,delta6,delta7,"
          "pollution_count,runtime_ms")


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _minimal(**kw):
    cfg = {"domain": {"kind": "rectangle"}, "hole": {"kind": "disk"}, "epsilons": [0.2, 0.1]}
    cfg.update(kw)
    return cfg


def test_sweep_writes_csv_and_figures(tmp_path, capsys):
    rc = cli.main(["sweep", "--config", str(QUICK), "--out", str(tmp_path)])
    assert rc == 0
    csv = (tmp_path / "quick.csv").read_text().splitlines()
    assert csv[0] == HEADER
    assert len(csv) == 1 + 3 * 4
    for name in ("quick_dbar.svg", "quick_delta.svg"):
        text = (tmp_path / name).read_text()
        assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert "dbar" in capsys.readouterr().out


def test_golden_header_matches_columns():
    assert ",".join(CSV_COLUMNS) == HEADER


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "neumannhole.cli", "mesh", "--config", str(QUICK),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "omega.mesh").exists()
    assert (tmp_path / "hole_eps0.1.mesh").exists()


def test_missing_config_exit_1(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["sweep", "--config", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_invalid_json_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_non_decreasing_epsilons_exit_1(tmp_path, capsys):
    p = _write(tmp_path, _minimal(epsilons=[0.1, 0.2]))
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "epsilons" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    p = _write(tmp_path, {**_minimal(), "holes": {}})
    assert cli.main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "holes" in capsys.readouterr().err


def test_unknown_subcommand_exit_1(capsys):
    assert cli.main(["frobnicate", "--config", "x.json"]) == 1
    assert "invalid choice" in capsys.readouterr().err


def test_missing_config_flag_exit_1(capsys):
    assert cli.main(["sweep"]) == 1
    assert "--config" in capsys.readouterr().err


def test_bad_threads_exit_1(tmp_path):
    assert cli.main(["sweep", "--config", str(QUICK), "--out", str(tmp_path), "--threads", "0"]) == 1


def test_defaults_filled():
    cfg, extra = cli.parse_config(_minimal())
    assert cfg.mesh_h == pytest.approx(0.1 / 8)
    assert cfg.m == 6 and cfg.tol == 1e-8 and cfg.eta is None
    assert cfg.seed == 0 and cfg.compute_delta and not cfg.record_runtime
    assert extra == {"grid_n": 64}


@pytest.mark.parametrize("patch, field", [
    ({"eta": "sometimes"}, "eta"),
    ({"m": 2.5}, "m"),
    ({"field": {"type": "dipole"}}, "field.type"),
    ({"field": {"gauge": {"phase": "xy"}}}, "field.gauge"),
    ({"hole": {"kind": "torus"}}, "hole.kind"),
    ({"domain": {"kind": "rectangle", "corners": [0, 0, 1]}}, "domain.corners"),
    ({"record_runtime": "yes"}, "record_runtime"),
    ({"name": "a/b"}, "name"),
])
def test_schema_errors_name_field(patch, field):
    with pytest.raises(ConfigError) as info:
        cli.parse_config(_minimal(**patch))
    assert info.value.field.startswith(field)


def test_unknown_gauge_exit_1(tmp_path, capsys):
    p = _write(tmp_path, _minimal(field={"gauge": {"chi": "x3"}}))
    assert cli.main(["solve", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "x3" in capsys.readouterr().err


def test_missing_required_key():
    with pytest.raises(ConfigError) as info:
        cli.parse_config({"domain": {}, "hole": {"kind": "disk"}})
    assert info.value.field == "epsilons"


def test_numerical_failure_exit_2(tmp_path, monkeypatch, capsys):
    def fail(*a, **k):
        raise ConvergenceError("did not converge")

    monkeypatch.setattr(cli, "solve_lowest", fail)
    assert cli.main(["solve", "--config", str(QUICK), "--out", str(tmp_path)]) == 2
    assert "ConvergenceError" in capsys.readouterr().err


def test_exit_codes_stable(tmp_path):
    codes = [cli.main(["sweep", "--config", str(tmp_path / "missing.json")]) for _ in range(2)]
    assert codes == [1, 1]


def test_solve_csv(tmp_path):
    assert cli.main(["solve", "--config", str(QUICK), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "quick_eigenvalues.csv").read_text().splitlines()
    assert lines[0] == "domain,epsilon,k,lambda,residual"
    assert len(lines) == 1 + 4 * 4
