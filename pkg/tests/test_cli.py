import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from scmkit.cli import main, run
from scmkit.config import BATTERY, config_from_dict
from scmkit.errors import ConfigError
from scmkit.panel import load_panel
from scmkit.report import read_table

FAST = {
    "gsynth": {"factor_range": [0, 1, 2], "n_boot": 20},
    "mc": {"lambdas": [0.05], "n_boot": 10},
    "placebo": {"n_samples": 500},
}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    cfg = config_from_dict({"seed": 7, "out": str(d), "simulate": {"n_units": 18, "n_years": 62}})
    assert run("simulate", cfg) == 0
    meta = json.loads((d / "simulated_panel.json").read_text())
    return d, meta


def write_config(path: Path, sim_dir, **extra) -> Path:
    d, meta = sim_dir
    data = {"panel_path": str(d / "simulated_panel.csv"), "treated_unit": meta["treated_unit"],
            "treatment_year": meta["treatment_year"], "outcomes": ["y"], "seed": 3, **FAST, **extra}
    path.write_text(yaml.safe_dump(data))
    return path


def test_validate_exit_zero(tmp_path, sim_dir):
    cfg = write_config(tmp_path / "c.yaml", sim_dir)
    res = CliRunner().invoke(main, ["validate", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.exit_code == 0, res.output
    m = json.loads((tmp_path / "o" / "manifest_validate.json").read_text())
    assert m["status"] == 0 and len(m["config_hash"]) == 64 and m["seed"] == 3
    assert "numpy" in m["versions"] and m["panel_sha256"]
    assert (tmp_path / "o" / "timestamp_validate.txt").exists()


def test_unknown_outcome_exit_one(tmp_path, sim_dir):
    cfg = write_config(tmp_path / "c.yaml", sim_dir)
    res = CliRunner().invoke(main, ["scm", "--config", str(cfg), "--outcome", "nope",
                                    "--out", str(tmp_path / "o")])
    assert res.exit_code == 1
    assert "nope" in res.output and "UnknownVariable" in res.output


def test_config_errors_exit_one(tmp_path, sim_dir):
    cfg = write_config(tmp_path / "c.yaml", sim_dir, bogus=1)
    res = CliRunner().invoke(main, ["scm", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.exit_code == 1 and "bogus" in res.output
    with pytest.raises(ConfigError):
        config_from_dict({"seed": -1})
    with pytest.raises(ConfigError):
        config_from_dict({"threads": 0})


def test_estimation_failure_exit_two(tmp_path, sim_dir):
    cfg = write_config(tmp_path / "c.yaml", sim_dir, gsynth={"factor_range": [0, 90], "n_boot": 0})
    res = CliRunner().invoke(main, ["gsynth", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2 and "FactorRangeInvalid" in res.output


def test_env_overrides(tmp_path, sim_dir, monkeypatch):
    cfg = write_config(tmp_path / "c.yaml", sim_dir)
    monkeypatch.setenv("SCMKIT_SEED", "11")
    monkeypatch.setenv("SCMKIT_OUT", str(tmp_path / "env"))
    res = CliRunner().invoke(main, ["validate", "--config", str(cfg)])
    assert res.exit_code == 0, res.output
    m = json.loads((tmp_path / "env" / "manifest_validate.json").read_text())
    assert m["seed"] == 11


def battery(tmp_path, sim_dir, name, threads):
    cfg = write_config(tmp_path / f"{name}.yaml", sim_dir)
    out = tmp_path / name
    res = CliRunner().invoke(main, ["report", "--config", str(cfg), "--out", str(out), "--threads", str(threads)])
    return res, out


@pytest.fixture(scope="module")
def battery_runs(tmp_path_factory, sim_dir):
    tmp = tmp_path_factory.mktemp("battery")
    return battery(tmp, sim_dir, "a", 1), battery(tmp, sim_dir, "b", 2)


def test_full_battery_one_invocation(battery_runs):
    (res, out), _ = battery_runs
    assert res.exit_code == 0, res.output
    _, status = read_table(out / "report.csv")
    assert [s["subcommand"] for s in status] == list(BATTERY)
    assert all(s["status"] == "ok" for s in status)
    results = [p for p in out.glob("*.csv") if not p.stem.endswith("_figure") and p.stem != "report"]
    assert len(results) >= 9
    assert len(list(out.glob("*_figure.csv"))) >= 9


def test_battery_byte_identical(battery_runs):
    (_, a), (_, b) = battery_runs
    names = sorted(p.name for p in a.iterdir() if not p.name.startswith(("manifest_", "timestamp_")))
    assert names == sorted(p.name for p in b.iterdir() if not p.name.startswith(("manifest_", "timestamp_")))
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    ma = json.loads((a / "manifest_report.json").read_text())
    mb = json.loads((b / "manifest_report.json").read_text())
    assert ma["config_hash"] == mb["config_hash"]


def test_long_tables_reparse(battery_runs):
    (_, out), _ = battery_runs
    checked = 0
    for path in sorted(out.glob("*.csv")):
        header = path.read_text().splitlines()[0]
        if header == "unit,year,variable,value":
            load_panel(path)
            checked += 1
    assert checked >= 3
