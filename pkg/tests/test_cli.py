import json
import subprocess
import sys

import pytest

from shortskew.cli import RunConfig, load_config, main, parse_config_file
from shortskew.errors import ConfigError


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["simulate", "--output-dir", str(out), "--n-stocks", "6", "--seed", "3"]) == 0
    assert main(["all", "--output-dir", str(out)]) == 0
    return out


def test_all_stage_artifacts(run_dir):
    expected = [
        "data/prices.csv", "data/ground_truth.csv", "data/manifest.json",
        "excess/excess_returns.csv", "excess/report.json",
        "egarch/params.csv", "egarch/normalized.csv", "egarch/report.json",
        "stats/per_stock.csv", "stats/table2.csv", "stats/table2.json", "stats/table2.txt",
        "panel/samples_quarter.csv", "panel/fits_quarter.json", "panel/table_quarter.txt",
        "figures/density.csv", "figures/ecdf.csv", "figures/tails.csv",
        "figures/skewness_vs_interval.csv", "figures/correlation_vs_interval.csv",
        "run_manifest.json",
    ]
    missing = [p for p in expected if not (run_dir / p).exists()]
    assert not missing


def test_panel_report_contents(run_dir):
    fits = json.loads((run_dir / "panel" / "fits_quarter.json").read_text())
    assert fits["n_time_windows"] == 33
    assert fits["windowing"] == "quarter"
    assert {f["dependent"] for f in fits["fits"]} == {
        "skew_raw", "skew_excess", "skew_normalized", "leverage_xi1", "corr_raw", "corr_excess"}
    table = (run_dir / "panel" / "table_quarter.txt").read_text()
    assert "short sale practiced" in table and "Industry fixed effect" in table


def test_manifest_records_stages(run_dir):
    m = json.loads((run_dir / "run_manifest.json").read_text())
    assert set(m["stages"]) == {"simulate", "excess", "egarch", "stats", "panel", "figures"}
    assert all(v["seconds"] is not None for v in m["stages"].values())
    assert m["config"]["windowing"] == "quarter"


def test_half_year_panel(run_dir):
    assert main(["panel", "--output-dir", str(run_dir), "--windowing", "half_year"]) == 0
    fits = json.loads((run_dir / "panel" / "fits_half_year.json").read_text())
    assert fits["n_time_windows"] == 17


def test_missing_upstream_exit_3(tmp_path, capsys):
    assert main(["egarch", "--output-dir", str(tmp_path)]) == 3
    assert "excess" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("windowing = quarter\nmin_obs = 5\n")
    assert main(["all", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 1
    assert "min_obs" in capsys.readouterr().err


def test_computation_error_exit_2(tmp_path):
    # three stocks are too few for the cross-sectional tests
    assert main(["simulate", "--output-dir", str(tmp_path), "--n-stocks", "3"]) == 0
    assert main(["excess", "--output-dir", str(tmp_path)]) == 0
    assert main(["egarch", "--output-dir", str(tmp_path)]) == 0
    assert main(["stats", "--output-dir", str(tmp_path)]) == 2


def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nwindowing = half_year  # trailing\nseed = 7\n\ncluster = stock\n")
    assert parse_config_file(p) == {"windowing": "half_year", "seed": "7", "cluster": "stock"}
    cfg = load_config(p, {"seed": "9"})
    assert (cfg.windowing, cfg.seed, cfg.cluster) == ("half_year", 9, "stock")
    with pytest.raises(ConfigError):
        RunConfig().set("windowing", "monthly")
    with pytest.raises(ConfigError):
        load_config(None, {"period_start": "2014-01-01", "period_end": "2013-01-01"})
    p.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_file(p)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "shortskew", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
