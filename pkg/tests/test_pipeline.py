import json
import subprocess
import sys

import numpy as np
import pytest

from aienav.errors import IncompatibleReportError, ValidationError
from aienav.pipeline import cli
from aienav.pipeline.config import build_config, load_config
from aienav.pipeline.io import read_sensor_log, read_table, write_sensor_log, write_step_csv
from aienav.pipeline.run import RunReport, run_compare, run_estimate, run_simulation
from aienav.rcie import HEADING_HYPERPARAMETERS, SURGE_HYPERPARAMETERS
from aienav.sim import truth_increments

SHORT = {"simulator": {"horizon": 60.0}}


def _yaml(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _short_config(tmp_path, extra="", name="cfg.yaml"):
    return _yaml(tmp_path, "simulator:\n  horizon: 60.0\n" + extra, name)


def test_default_channel_hyperparameters():
    cfg = load_config(None)
    assert cfg.channels["surge"].hyperparameters == SURGE_HYPERPARAMETERS
    assert cfg.channels["heading"].hyperparameters == HEADING_HYPERPARAMETERS
    assert cfg.sample_period == 0.546
    assert cfg.baseline_input == 1.0


def test_config_hash_tracks_content():
    a, b = build_config(), build_config()
    assert a.config_hash == b.config_hash
    assert a.with_seed(9).config_hash != a.config_hash


@pytest.mark.parametrize(
    "data",
    [
        {"channels": {"surge": {"hyperparameters": {"theta0": [0.0, 0.0]}}}},
        {"channels": {"heading": {"hyperparameters": {"n_e": 0}}}},
        {"reconstruction_mode": "spiral"},
        {"innovation_sign": 0},
        {"unknown_key": 1},
        {"simulator": {"horizon": 0.1}},
        {"seed": -1},
    ],
)
def test_invalid_configs_rejected(data):
    with pytest.raises(ValidationError):
        build_config(data)


def test_yaml_error_carries_line(tmp_path):
    with pytest.raises(ValidationError) as info:
        load_config(_yaml(tmp_path, "seed: 1\nchannels: [\n"))
    assert str(info.value).startswith("line ")


def test_sensor_log_round_trip_is_byte_exact(tmp_path):
    run = run_simulation(build_config(SHORT))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sensor_log(p1, run.records)
    write_sensor_log(p2, read_sensor_log(p1))
    assert p1.read_bytes() == p2.read_bytes()
    assert b"\r" not in p1.read_bytes()


def test_read_table_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValidationError, match="line 1"):
        read_table(empty, ("t", "lat", "lon", "heading_deg"))
    bad = tmp_path / "bad.csv"
    bad.write_text("t,lat,lon,heading_deg\n0,40,-75,0\n0.5,40,x,0\n")
    with pytest.raises(ValidationError, match="line 3"):
        read_sensor_log(bad)
    header_only = tmp_path / "h.csv"
    header_only.write_text("t,lat,lon,heading_deg\n")
    with pytest.raises(ValidationError):
        read_sensor_log(header_only)
    backwards = tmp_path / "back.csv"
    backwards.write_text("t,lat,lon,heading_deg\n1,40,-75,0\n0.5,40,-75,0\n")
    with pytest.raises(ValidationError, match="line 3"):
        read_sensor_log(backwards)


def _truth_rows(run):
    tr = run.truth
    return np.column_stack([tr[:, 0], tr[:, 1], tr[:, 2], np.degrees(tr[:, 3]) % 360, tr[:, 4], tr[:, 7], tr[:, 8]])


def test_noiseless_log_aie_beats_baseline():
    cfg = build_config({"simulator": {"horizon": 200.0, "gps_sigma": 0.0, "compass_sigma": 0.0}})
    run = run_simulation(cfg)
    rep = run_estimate(cfg, run.records, _truth_rows(run))
    s = rep.summary
    assert s["reference"] == "truth"
    for ch in ("surge", "heading"):
        assert s["rmse_aie"][ch] < s["rmse_kf"][ch]


def test_truth_reference_matches_simulator_increments():
    cfg = build_config(SHORT)
    run = run_simulation(cfg)
    rep = run_estimate(cfg, run.records, _truth_rows(run))
    ds, dth = truth_increments(run)
    np.testing.assert_allclose(rep.column("ref_ds"), ds, atol=1e-12)
    np.testing.assert_allclose(rep.column("ref_dtheta"), dth, atol=1e-12)


def test_estimate_interpolates_dropped_fixes():
    cfg = build_config({"simulator": {"horizon": 60.0, "gps_dropout_prob": 0.2}})
    run = run_simulation(cfg)
    assert run.gaps
    rep = run_estimate(cfg, run.records)
    interior = [t for t in run.gaps if t < run.records[-1].timestamp]
    assert rep.summary["interpolated_steps"] == len(interior)


def test_estimate_needs_three_fixes():
    run = run_simulation(build_config(SHORT))
    with pytest.raises(ValidationError):
        run_estimate(build_config(SHORT), run.records[:2])


def test_compare_identity():
    cfg = build_config(SHORT)
    rep = run_estimate(cfg, run_simulation(cfg).records)
    doc, cols, deltas = run_compare(rep, rep)
    assert np.all(deltas[:, 2:] == 0.0)
    assert all(v == 1.0 for v in doc["ratios"].values())
    assert set(doc["winners"].values()) == {"tie"}


def test_compare_rejects_different_grids():
    a = run_estimate(build_config(SHORT), run_simulation(build_config(SHORT)).records)
    longer = build_config({"simulator": {"horizon": 80.0}})
    b = run_estimate(longer, run_simulation(longer).records)
    with pytest.raises(IncompatibleReportError):
        run_compare(a, b)


def test_acceptance_pair_ratio_below_one():
    cfg = build_config({"simulator": {"horizon": 200.0}})
    run = run_simulation(cfg)
    rep = run_estimate(cfg, run.records, _truth_rows(run))
    doc, _, _ = run_compare(rep, rep)
    for ch in ("surge", "heading"):
        assert doc["aie_to_kf_rmse"]["a"][ch] < 1.0


def test_report_round_trip(tmp_path):
    cfg = build_config(SHORT)
    rep = run_estimate(cfg, run_simulation(cfg).records)
    rep.write(tmp_path / "r")
    back = RunReport.read(tmp_path / "r")
    assert back.columns == rep.columns
    np.testing.assert_array_equal(back.table, rep.table)
    assert back.summary == json.loads(json.dumps(rep.summary))


# command line


def _cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_simulate_estimate_reconstruct_compare(tmp_path):
    cfg = _short_config(tmp_path)
    sim, est = tmp_path / "sim", tmp_path / "est"
    assert _cli("simulate", "--config", cfg, "--output-dir", sim) == 0
    assert _cli("estimate", "--config", cfg, "--input", sim / "sensor_log.csv",
                "--truth", sim / "truth.csv", "--output-dir", est) == 0
    summary = json.loads((est / "summary.json").read_text())
    assert summary["reference"] == "truth"
    assert _cli("reconstruct", "--input", est, "--mode", "literal", "--output-dir", tmp_path / "rec") == 0
    traj = read_table(tmp_path / "rec" / "trajectory.csv",
                      ("k", "aie_x_north", "aie_y_east", "kf_x_north", "kf_y_east", "meas_x_north", "meas_y_east"))
    assert len(traj) == summary["steps"] + 1
    assert _cli("compare", "--input", est, "--input", est, "--output-dir", tmp_path / "cmp") == 0
    doc = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert all(v == 0.0 for v in doc["max_abs_delta"].values())


def test_cli_compare_exit_code_when_b_wins(tmp_path):
    cfg_a = _short_config(tmp_path, "baseline_input: 3.0\n", "a.yaml")
    cfg_b = _short_config(tmp_path)
    sim = tmp_path / "sim"
    _cli("simulate", "--config", cfg_b, "--output-dir", sim)
    for name, cfg in (("a", cfg_a), ("b", cfg_b)):
        _cli("estimate", "--config", cfg, "--input", sim / "sensor_log.csv",
             "--truth", sim / "truth.csv", "--output-dir", tmp_path / name)
    code = _cli("compare", "--input", tmp_path / "a", "--input", tmp_path / "b", "--output-dir", tmp_path / "cmp")
    doc = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert doc["winners"]["rmse_kf.surge"] == "b"
    assert code == cli.EXIT_B_BETTER


def test_cli_empty_log_is_validation_error(tmp_path, capsys):
    log = tmp_path / "empty.csv"
    log.write_text("")
    out = tmp_path / "out"
    assert _cli("estimate", "--input", log, "--output-dir", out) == cli.EXIT_VALIDATION
    assert not out.exists()
    assert "line 1" in capsys.readouterr().err


def test_cli_bad_config_exit_code(tmp_path):
    cfg = _yaml(tmp_path, "innovation_sign: 2\n")
    assert _cli("simulate", "--config", cfg, "--output-dir", tmp_path / "o") == cli.EXIT_VALIDATION


def test_cli_divergence_exit_code(tmp_path, capsys):
    cfg = _short_config(tmp_path, "divergence_bound: 1.0e-9\n")
    sim = tmp_path / "sim"
    _cli("simulate", "--config", cfg, "--output-dir", sim)
    code = _cli("estimate", "--config", cfg, "--input", sim / "sensor_log.csv", "--output-dir", tmp_path / "e")
    assert code == cli.EXIT_DIVERGENCE
    assert "surge channel" in capsys.readouterr().err


def test_cli_sysid(tmp_path):
    # onset at t = 1 falls on a sample
    t = np.arange(200) * 0.05
    levels = np.where(t >= 1.0, 0.8, 0.0)
    v = np.where(t >= 1.0, (0.8 / 0.311) * (1 - np.exp(-(0.311 / 0.469) * (t - 1.0))), 0.0)
    step = tmp_path / "step.csv"
    write_step_csv(step, t, v, levels)
    assert _cli("sysid", "--input", step, "--output-dir", tmp_path / "fit") == 0
    fit = json.loads((tmp_path / "fit" / "fit.json").read_text())
    assert fit["inertia"] == pytest.approx(0.469, rel=1e-6)
    assert fit["drag"] == pytest.approx(0.311, rel=1e-6)


def test_cli_seed_override_changes_log(tmp_path):
    cfg = _short_config(tmp_path)
    _cli("simulate", "--config", cfg, "--output-dir", tmp_path / "a")
    _cli("simulate", "--config", cfg, "--seed", 5, "--output-dir", tmp_path / "b")
    assert (tmp_path / "a" / "sensor_log.csv").read_bytes() != (tmp_path / "b" / "sensor_log.csv").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "aienav", "simulate", "--config", _short_config(tmp_path),
         "--output-dir", str(tmp_path / "s")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "s" / "sensor_log.csv").exists()
