"""Test the dtcsim command line"""

import numpy as np
import pandas as pd
import pytest
from conftest import sweep_text

from qdot.dtcsim import main as cli
from qdot.dtcsim.oracle import VerificationResult

TRACE_TEXT = """kind: trace
model: ising
chain:
  n_sites: 4
  j_mean: 0.6
  field_width: [0.0, 0.0, 0.05]
trace:
  n_periods: 6
  sampling: every_period
  realizations: 2
"""

PROTOCOL_TEXT = """kind: protocol
model: heisenberg
chain:
  n_sites: 3
  j_mean: pi
  field_width: [1.0, 1.0, 1.0]
drive:
  floquet_error: 0.05
  h2i_count: 4
  events:
    - period: 2
      rotate: {axis: y, angle: pi/2}
    - period: 2
      floquet_axis: y
initial:
  product_z: uuu
protocol:
  n_periods: 4
  realizations: 2
  control_j_mean: 0.0
  n_sites_scan: [1, 2]
"""


def write_config(tmp_path, text, name="run.yml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run(argv, tmp_path, fmt="csv"):
    return cli.main([*argv, "--out", str(tmp_path / "out"), "--format", fmt])


def test_presets_listing(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "fig2a" in out
    assert "fig14d" in out


def test_verify_exit_codes(monkeypatch, capsys):
    results = [VerificationResult("fine", 0.0, 1e-10)]
    monkeypatch.setattr(cli, "run_verification_suite", lambda seed: results)
    assert cli.main(["verify"]) == 0
    assert "fine" in capsys.readouterr().out
    results.append(VerificationResult("broken", 1.0, 1e-10))
    assert cli.main(["verify", "--seed", "2"]) == 1
    assert "broken" in capsys.readouterr().err


def test_sweep(tmp_path):
    config = write_config(tmp_path, sweep_text())
    assert run(["sweep", "--config", config], tmp_path) == 0
    frame = pd.read_csv(tmp_path / "out" / "sweep.csv")
    assert len(frame) == 4
    assert frame["value"].between(-1, 1).all()


def test_sweep_overrides(tmp_path):
    config = write_config(tmp_path, sweep_text())
    argv = ["sweep", "--config", config, "--grid", "3x2", "--realizations", "1"]
    assert run(argv, tmp_path) == 0
    frame = pd.read_csv(tmp_path / "out" / "sweep.csv")
    assert len(frame) == 6
    assert (frame["n_realizations"] == 1).all()


def test_sweep_rerun_is_identical(tmp_path):
    config = write_config(tmp_path, sweep_text())
    first, second = tmp_path / "first", tmp_path / "second"
    for out, workers in ((first, "1"), (second, "2")):
        argv = ["sweep", "--config", config, "--workers", workers]
        assert cli.main([*argv, "--out", str(out), "--format", "csv"]) == 0
    assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()
    echoed = str(first / "run_config.yml")
    third = tmp_path / "third"
    argv = ["sweep", "--config", echoed, "--out", str(third), "--format", "csv"]
    assert cli.main(argv) == 0
    assert (first / "sweep.csv").read_bytes() == (third / "sweep.csv").read_bytes()


def test_preset_sweep(tmp_path):
    argv = ["sweep", "--preset", "fig2a", "--grid", "2x2", "--realizations", "1"]
    assert run(argv, tmp_path, fmt="both") == 0
    frame = pd.read_csv(tmp_path / "out" / "fig2a.csv")
    assert len(frame) == 4
    assert (tmp_path / "out" / "fig2a_heatmap.svg").exists()


def test_failed_cells_exit_3(tmp_path, capsys):
    config = write_config(tmp_path, sweep_text(site=5))
    assert run(["sweep", "--config", config], tmp_path) == 3
    assert "cells missing" in capsys.readouterr().err
    frame = pd.read_csv(tmp_path / "out" / "sweep.csv")
    assert frame["value"].isna().all()


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep"],
        ["sweep", "--preset", "fig99"],
        ["trace", "--preset", "fig2a"],
        ["trace", "--preset", "fig3a", "--grid", "2x2"],
    ],
)
def test_config_errors(tmp_path, capsys, argv):
    assert run(argv, tmp_path) == 2
    assert "See docs/dtcsim.rst" in capsys.readouterr().err


def test_schema_error_reports_line(tmp_path, capsys):
    text = sweep_text().replace("  n_sites: 4\n", "  n_sites: 4\n  colour: red\n")
    config = write_config(tmp_path, text)
    assert run(["sweep", "--config", config], tmp_path) == 2
    assert "line 5" in capsys.readouterr().err


def test_trace(tmp_path):
    config = write_config(tmp_path, TRACE_TEXT)
    assert run(["trace", "--config", config], tmp_path, fmt="both") == 0
    frame = pd.read_csv(tmp_path / "out" / "trace.csv")
    post = frame[frame["tag"] == "post_pulse"]
    assert post["period"].tolist() == list(range(7))
    signs = np.sign(post["s1_z"].to_numpy())
    assert (signs[1:] == -signs[:-1]).all(), "<s1z> does not alternate"
    assert (tmp_path / "out" / "trace.svg").exists()


def test_late_event_is_config_error(tmp_path):
    text = TRACE_TEXT.replace(
        "trace:\n",
        "drive:\n  events:\n    - {period: 9, floquet_axis: y}\ntrace:\n",
    )
    config = write_config(tmp_path, text)
    assert run(["trace", "--config", config], tmp_path) == 2


def test_protocol(tmp_path):
    config = write_config(tmp_path, PROTOCOL_TEXT)
    assert run(["protocol", "--config", config], tmp_path) == 0
    purity = pd.read_csv(tmp_path / "out" / "protocol_purity.csv")
    assert list(purity.columns) == [
        "period",
        "j_mean_3.142",
        "control_j_mean_0",
        "n_sites_1",
        "n_sites_2",
    ]
    assert purity["period"].tolist() == [0, 1, 2, 3, 4]
    assert ((purity.drop(columns="period") <= 1 + 1e-9).all()).all()
    assert (tmp_path / "out" / "protocol_trace.csv").exists()


@pytest.mark.parametrize(
    "command, kind, name",
    [("verify", "verify", "verify"), ("protocol", "protocol", "fig9")],
)
def test_default_documents(command, kind, name):
    document, _ = cli.load_document(cli.parse_args([command, "--seed", "5"]))
    config = cli.validate_run_config(document)
    assert config.kind == kind
    assert config.output.name == name
    assert config.master_seed == 5, f"seed override lost for {command}"


@pytest.mark.parametrize("workers, expected", [("0", 0), ("3", 3)])
def test_workers_option(workers, expected):
    args = cli.parse_args(["trace", "--preset", "fig12", "--workers", workers])
    assert args.workers == expected


def test_negative_workers_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.parse_args(["trace", "--preset", "fig12", "--workers", "-3"])
    assert exc.value.code == 2
    assert "must be >= 0" in capsys.readouterr().err
