import json
import math

import numpy as np
import pytest

from cfsurv import cli
from cfsurv.config import ConfigError, SystemConfig
from cfsurv.experiments import (
    ExperimentSpec, ResultTable, emit_results, load_results, parse_config, point_config,
    preset_spec, run_sweep,
)

TINY = SystemConfig(num_mns=4, antennas_per_mn=2, num_pairs=2, area_side=0.3)


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    config, spec = parse_config(p)
    assert config == SystemConfig() and spec == ExperimentSpec()


def test_override_and_rejections(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("system:\n  area_side: 0.75\nexperiment:\n  drops: 3\n")
    config, spec = parse_config(p)
    assert config.area_side == 0.75 and spec.drops == 3
    p.write_text("system:\n  num_pairs: 4\n  pilot_len: 4\n")
    with pytest.raises(ConfigError):
        parse_config(p)
    p.write_text("system:\n  bogus: 1\n")
    with pytest.raises(ConfigError):
        parse_config(p)
    p.write_text("experiment:\n  sweep: Q\n")
    with pytest.raises(ConfigError):
        parse_config(p)
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_point_config_fixed_total():
    spec = ExperimentSpec(sweep="N_total", values=(4, 6, 12), total_antennas=240)
    cfg = point_config(SystemConfig(), spec, 12)
    assert (cfg.antennas_per_mn, cfg.num_mns) == (12, 20)
    with pytest.raises(ConfigError):
        point_config(SystemConfig(), spec, 7)


def test_one_row_per_drop_and_scheme_and_baseline():
    spec = ExperimentSpec(sweep="D", values=(0.3, 0.4), drops=2, baselines=("proposed", "case1", "colocated"))
    table = run_sweep(TINY, spec)
    assert len(table) == 2 * 2 * 2 * 3
    assert all(r["status"] == "ok" for r in table.rows)
    assert all(0 <= r["min_msp"] <= r["mean_msp"] <= r["max_msp"] <= 1 for r in table.rows)
    avg = table.average(0.3, "MR", "proposed")
    assert 0 <= avg <= 1


def test_failed_points_are_recorded_not_raised():
    spec = ExperimentSpec(sweep="N_total", values=(2, 7), drops=1, schemes=("MR",), total_antennas=8)
    table = run_sweep(TINY, spec)
    statuses = [r["status"] for r in table.rows]
    assert statuses[0] == "ok" and statuses[1].startswith("error")
    assert math.isnan(table.rows[1]["min_msp"])


def test_empty_table_writes_header_only(tmp_path):
    path = emit_results(ResultTable(), tmp_path / "r.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 1 and "elapsed_s" not in lines[0]


def test_json_round_trip_and_byte_determinism(tmp_path):
    spec = ExperimentSpec(drops=2, schemes=("MR",), baselines=("proposed", "random_modes"), seed=3)
    a = run_sweep(TINY, spec)
    b = run_sweep(TINY, spec, workers=2)
    pa = emit_results(a, tmp_path / "a.json", "json")
    pb = emit_results(b, tmp_path / "b.json", "json")
    assert pa.read_bytes() == pb.read_bytes()
    back = load_results(pa)
    assert [r["min_msp"] for r in back.rows] == [r["min_msp"] for r in a.rows]
    ca = emit_results(a, tmp_path / "a.csv")
    cb = emit_results(b, tmp_path / "b.csv")
    assert ca.read_bytes() == cb.read_bytes()


def test_presets():
    assert preset_spec("fig3").sweep == "N_total"
    assert preset_spec("fig4", drops=2).drops == 2
    with pytest.raises(ConfigError):
        preset_spec("fig9")


def test_cli_solve_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("system:\n  num_mns: 4\n  antennas_per_mn: 2\n  num_pairs: 2\n  area_side: 0.3\n"
                   "experiment:\n  drops: 1\n  schemes: [MR]\n")
    out = tmp_path / "solve.json"
    assert cli.main(["solve", "--config", str(cfg), "--output", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert set(payload["traces"]) >= {"modes", "alternating"}
    assert 0 <= payload["min_msp"] <= 1
    csv_out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--output", str(csv_out)]) == 0
    assert len(csv_out.read_text().splitlines()) == 2


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("system:\n  num_mns: 0\n")
    assert cli.main(["sweep", "--config", str(cfg)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_verify_quick(tmp_path, capsys):
    out = tmp_path / "v.json"
    code = cli.main(["verify", "--quick", "--output", str(out)])
    report = json.loads(out.read_text())
    assert code == (0 if report["passed"] else 1)
    assert len(report["checks"]) == 8
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 8 and all(l.startswith(("PASS", "FAIL")) for l in lines)
