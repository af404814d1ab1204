"""
Tests for the experiment runner CLI
"""

import csv
import io

import pytest

from execution.reports import SUMMARY_COLUMNS, SWEEP_METRICS, format_value
from execution.run_experiments import cmd_model, cmd_run, cmd_sweep, main, parse_values

SMALL = """
id = "small"
seed = 1
duration_s = 1.5

[link]
rate_mbps = 10.0
rtt_ms = 25.0
queue_bdp = 1.0

[link.loss]
p = 0.01

[[flows]]
protocol = "ctcp"
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL, encoding="utf-8")
    return path


def rows(text: str) -> list:
    return list(csv.DictReader(io.StringIO(text)))


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "1"
    assert format_value(0.1 + 0.2) == "0.3"
    assert format_value(12345678.9) == "1.23457e+07"
    assert format_value(7) == "7"


@pytest.mark.parametrize("spec, expected", [
    ("", []),
    ("0.1,0.2", [0.1, 0.2]),
    ("1,2", [1, 2]),
    ("0:1:3", [0.0, 0.5, 1.0]),
])
def test_parse_values(spec, expected):
    assert parse_values(spec) == expected


def test_parse_values_rejects_bad_grid():
    with pytest.raises(ValueError):
        parse_values("0:1")


# =============================================================================
# run
# =============================================================================

def test_run_writes_summary_and_timeseries(scenario_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario_file), "--out", str(out), "--timeseries"]) == 0

    summary = rows((out / "small_summary.csv").read_text(encoding="utf-8"))
    assert len(summary) == 1
    assert list(summary[0]) == SUMMARY_COLUMNS
    assert float(summary[0]["efficiency"]) > 0
    assert (out / "small_timeseries.csv").exists()


def test_same_seed_gives_identical_csv(scenario_file, tmp_path):
    for name in ("a", "b"):
        cmd_run(str(scenario_file), seed=5, out_dir=str(tmp_path / name), timeseries=True)
    for suffix in ("summary", "timeseries"):
        first = (tmp_path / "a" / f"small_{suffix}.csv").read_bytes()
        second = (tmp_path / "b" / f"small_{suffix}.csv").read_bytes()
        assert first == second


def test_seed_flag_lands_in_report(scenario_file):
    assert cmd_run(str(scenario_file), seed=9).seed == 9


def test_bundled_scenario_runs_by_id():
    report = cmd_run("efficiency_p01", duration=2.0)
    assert report.scenario_id == "efficiency_p01"
    assert 0 < report.efficiency <= 1


def test_run_cli_accepts_a_bundled_id_and_duration(capsys):
    assert main(["run", "--scenario", "efficiency_p01", "--duration", "1"]) == 0
    assert "efficiency_p01 (seed 1): efficiency" in capsys.readouterr().out
    assert main(["run", "--scenario", "efficiency_p01", "--duration", "-1"]) == 2


def test_missing_scenario_exits_nonzero(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "missing.toml")]) == 2
    assert "not found" in capsys.readouterr().err


def test_malformed_scenario_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text('id = "broken"\nduration_s = = 1\n', encoding="utf-8")
    assert main(["run", "--scenario", str(path)]) == 2
    assert "broken.toml:2" in capsys.readouterr().err


# =============================================================================
# sweep
# =============================================================================

def test_empty_sweep_is_header_only(scenario_file):
    text = cmd_sweep(str(scenario_file), "p", [])
    assert text == ",".join(["param", "value", "seed"] + SWEEP_METRICS) + "\n"


def test_queue_sweep_gives_one_row_per_value_in_order(scenario_file):
    result = rows(cmd_sweep(str(scenario_file), "queue_bdp", [1.0, 0.25]))
    assert [r["value"] for r in result] == ["0.25", "1"]
    assert all(r["param"] == "link.queue_bdp" for r in result)
    assert all(float(r["efficiency"]) > 0 for r in result)


def test_unknown_sweep_parameter_exits_nonzero(scenario_file):
    assert main(["sweep", "--scenario", str(scenario_file), "--param", "bogus", "--values", "1"]) == 2


def test_parallel_sweep_matches_serial(scenario_file):
    serial = cmd_sweep(str(scenario_file), "p", [0.0, 0.05], jobs=1)
    parallel = cmd_sweep(str(scenario_file), "p", [0.0, 0.05], jobs=2)
    assert serial == parallel


def test_sweep_writes_out_file(scenario_file, tmp_path):
    out = tmp_path / "curves" / "p.csv"
    assert main(["sweep", "--scenario", str(scenario_file), "--param", "p",
                 "--values", "0.01", "--out", str(out)]) == 0
    assert len(rows(out.read_text(encoding="utf-8"))) == 1


# =============================================================================
# model
# =============================================================================

def test_padhye_curve_is_decreasing():
    windows = [float(r["window"]) for r in rows(cmd_model("padhye"))]
    assert len(windows) == 50
    assert all(a > b for a, b in zip(windows, windows[1:]))


def test_eta_model_row():
    (row,) = rows(cmd_model("eta", "p=0.05", ["N=32"]))
    assert row["N"] == "32"
    assert row["n"] == "1"
    assert float(row["eta"]) == pytest.approx(0.95**32 / 32, rel=1e-5)
    assert 0 < float(row["efficiency_bound"]) <= 1


def test_stationary_model_honours_fixed_parameters():
    result = rows(cmd_model("stationary", "mean_T=1,2", ["rtt=0.05"]))
    assert [float(r["rtt"]) for r in result] == [0.05, 0.05]
    assert float(result[1]["rate"]) == pytest.approx(2 * float(result[0]["rate"]), rel=1e-4)


def test_unknown_model_parameter_is_rejected():
    with pytest.raises(ValueError):
        cmd_model("padhye", "q=0.1:0.2:2")
    with pytest.raises(ValueError):
        cmd_model("nope")


def test_unknown_model_name_exits_nonzero():
    with pytest.raises(SystemExit) as err:
        main(["model", "--name", "nope"])
    assert err.value.code == 2


def test_model_cli_prints_csv(capsys):
    assert main(["model", "--name", "padhye", "--grid", "p=0.01"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "p,window"
    assert out.splitlines()[1].startswith("0.01,12.247")


def test_sweeping_an_unused_loss_parameter_exits_nonzero(capsys):
    assert main(["sweep", "--scenario", "microwave_interference", "--param", "p", "--values", "0,0.5"]) == 2
    assert "not used by periodic_burst loss" in capsys.readouterr().err
