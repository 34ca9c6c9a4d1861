import json
import math
import os

import numpy as np
import pytest

from nearground.cli import EXIT_CONFIG, EXIT_CRASH, EXIT_FIT, EXIT_OK, main
from nearground.errors import InputError
from nearground.groundeffect import GroundEffectParams, thrust_factor, torque_lever
from nearground.harness import (
    MetricsReport,
    Scenario,
    angle_error_profile,
    compare,
    compute_metrics,
    run,
    sweep,
    write_series_csv,
)
from nearground.simulator import TrajectoryLog
from nearground.vehicle import VehicleParams


def _hover_scenario(name="hover_smoke", seed=7, duration=2.0, **kw):
    return Scenario(
        name=name,
        seed=seed,
        duration=duration,
        trajectory_kind="hover",
        trajectory_params={"height": 0.5},
        metrics_warmup=0.5,
        **kw,
    )


def _fast(scenario):
    scenario.sim.dt = 1e-3
    scenario.sim.log_decimation = 2
    return scenario


def test_run_writes_artifacts(tmp_path):
    scenario = _fast(_hover_scenario())
    out = tmp_path / "outdir"
    log, metrics = run(scenario, out_dir=str(out))
    assert (out / "scenario.resolved").exists()
    assert (out / "log.csv").exists()
    assert (out / "metrics.json").exists()
    back = TrajectoryLog.from_csv(out / "log.csv")
    assert np.array_equal(back.data, log.data)
    loaded = MetricsReport.from_json((out / "metrics.json").read_text())
    assert loaded.to_dict() == metrics.to_dict()


def test_perfect_model_hover_rmse_small():
    _, metrics = run(_fast(_hover_scenario()))
    assert metrics.rmse_all_cm < 1.0
    assert not metrics.crashed


def test_metric_component_consistency():
    _, metrics = run(_fast(_hover_scenario()))
    total_sq = metrics.rmse_all_cm**2
    assert total_sq + 1e-12 >= metrics.rmse_xoy_cm**2
    assert total_sq + 1e-12 >= metrics.rmse_z_cm**2
    assert abs(total_sq - metrics.rmse_xoy_cm**2 - metrics.rmse_z_cm**2) < 1e-9 * max(total_sq, 1.0)


def test_metrics_decimation_invariant():
    scenario = _hover_scenario(duration=3.0)
    scenario.sim.dt = 1e-3
    scenario.sim.log_decimation = 1
    scenario.sim.noise_gyro = 0.002
    log, metrics = run(scenario)
    decimated = compute_metrics(log.decimated(10), scenario)
    for field in ("rmse_xoy_cm", "rmse_z_cm", "rmse_all_cm"):
        full = getattr(metrics, field)
        dec = getattr(decimated, field)
        assert abs(full - dec) <= 0.01 * max(full, 1e-9)


def test_determinism_across_runs(tmp_path):
    scenario = _fast(_hover_scenario(seed=99))
    scenario.sim.noise_accel = 0.05
    scenario.sim.noise_gyro = 0.005
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run(scenario, out_dir=str(out_a))
    run(scenario, out_dir=str(out_b))
    assert (out_a / "log.csv").read_bytes() == (out_b / "log.csv").read_bytes()
    assert (out_a / "metrics.json").read_bytes() == (out_b / "metrics.json").read_bytes()


def test_compensated_beats_uncompensated_low_hover():
    on = _fast(_hover_scenario(name="comp_on", duration=2.5))
    on.trajectory_params = {"height": 0.12}
    off = _fast(_hover_scenario(name="comp_off", duration=2.5))
    off.trajectory_params = {"height": 0.12}
    off.gains.accel_comp = "none"
    off.gains.torque_comp = "none"
    _, m_on = run(on)
    _, m_off = run(off)
    assert m_on.rmse_all_cm < m_off.rmse_all_cm


def test_angle_profile_zero_for_zero_error_log():
    rows = np.zeros((200, len(TrajectoryLog.columns)))
    rows[:, 0] = np.linspace(0.0, 1.0, 200)               # t
    rows[:, 7] = 1.0                                      # qw
    rows[:, 18] = np.linspace(0.1, 1.0, 200)              # h
    idx = TrajectoryLog.columns.index("cmd_qw")
    rows[:, idx] = 1.0
    profile = angle_error_profile(TrajectoryLog(rows), half_width=0.05)
    assert len(profile) > 0
    assert np.allclose(profile[:, 1], 0.0)


def test_angle_profile_rejects_empty_log():
    with pytest.raises(InputError):
        angle_error_profile(TrajectoryLog(np.zeros((0, len(TrajectoryLog.columns)))))


def test_angle_profile_drops_thin_bins():
    rows = np.zeros((30, len(TrajectoryLog.columns)))
    rows[:, 7] = 1.0
    rows[:, TrajectoryLog.columns.index("cmd_qw")] = 1.0
    rows[:, 18] = np.concatenate([np.full(25, 0.5), np.linspace(1.0, 1.05, 5)])
    profile = angle_error_profile(TrajectoryLog(rows), half_width=0.02)
    assert np.all(np.abs(profile[:, 0] - 0.5) < 0.05)


def test_compare_identity_and_columns():
    a = MetricsReport("base", "hover()", 1, 3.0, 4.0, 5.0, 8.0, 1.0, 0.01, False, False)
    table = compare([a, a])
    assert table.rows[0]["reduction_pct"] == 0.0
    assert table.rows[1]["reduction_pct"] == 0.0
    for row in table.rows:
        assert row["rmse_all_cm"] + 1e-12 >= row["rmse_xoy_cm"]
        assert row["rmse_all_cm"] + 1e-12 >= row["rmse_z_cm"]
    text = table.to_text()
    assert "base" in text and "baseline" in text


def test_compare_reduction_and_mismatch_flag():
    base = MetricsReport("plain", "hover(a=1)", 1, 6.0, 8.0, 10.0, 15.0, 2.0, 0.02, False, False)
    good = MetricsReport("full", "hover(a=1)", 1, 3.0, 4.0, 5.0, 8.0, 1.0, 0.01, False, False)
    other = MetricsReport("odd", "lemniscate(a=2)", 1, 3.0, 4.0, 5.0, 8.0, 1.0, 0.01, False, False)
    table = compare([base, good], baseline="plain")
    assert abs(table.rows[1]["reduction_pct"] - 50.0) < 1e-9
    assert not table.mismatched_trajectories
    flagged = compare([base, other])
    assert flagged.mismatched_trajectories
    with pytest.raises(InputError):
        compare([base], baseline="nope")
    with pytest.raises(InputError):
        compare([])


def test_scenario_config_round_trip(tmp_path):
    path = tmp_path / "scn.cfg"
    path.write_text(
        "name = roundtrip\nseed = 11\nduration = 1.0\ntrajectory = hover\n"
        "traj.height = 0.4\nsim.dt = 1e-3\nsim.noise_gyro = 0.003\n"
        "ctrl.torque_comp = model\nmismatch = 1.05\nge.g1 = 0.07\nge.g4 = 0.07\n"
    )
    scenario = Scenario.from_file(str(path))
    assert scenario.name == "roundtrip"
    assert scenario.seed == 11
    assert scenario.sim.noise_gyro == 0.003
    assert scenario.gains.torque_comp == "model"
    assert scenario.mismatch == 1.05
    assert scenario.ge.g1 == 0.07
    resolved = scenario.resolved_text()
    assert "ctrl.torque_comp = model" in resolved
    assert "ge.g1 = 0.07" in resolved


def test_scenario_requires_seed(tmp_path):
    path = tmp_path / "scn.cfg"
    path.write_text("duration = 1.0\ntrajectory = hover\n")
    from nearground.errors import ConfigError

    with pytest.raises(ConfigError):
        Scenario.from_file(str(path))


def test_sweep_runs_each_value(tmp_path):
    path = tmp_path / "scn.cfg"
    path.write_text(
        "name = sweepy\nseed = 5\nduration = 1.0\ntrajectory = hover\n"
        "traj.height = 0.5\nsim.dt = 1e-3\nsim.log_decimation = 4\nmetrics_warmup = 0.3\n"
    )
    reports = sweep(str(path), "sim.noise_gyro", ["0.0", "0.004"], out_root=str(tmp_path / "sw"))
    assert len(reports) == 2
    assert reports[0].rmse_all_cm <= reports[1].rmse_all_cm
    assert (tmp_path / "sw" / "sim_noise_gyro=0.0" / "metrics.json").exists()


def test_write_series_csv(tmp_path):
    path = tmp_path / "series.csv"
    h = np.linspace(0.05, 1.0, 20)
    ge = GroundEffectParams()
    write_series_csv(path, ["h", "thrust_factor"], [h, [thrust_factor(x, ge) for x in h]])
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (20, 2)
    assert np.allclose(data[:, 0], h)


# -- CLI ----------------------------------------------------------------------

def _write_scenario(tmp_path, extra=""):
    path = tmp_path / "scn.cfg"
    path.write_text(
        "name = cli_hover\nseed = 3\nduration = 1.0\ntrajectory = hover\n"
        "traj.height = 0.5\nsim.dt = 1e-3\nsim.log_decimation = 4\n"
        "metrics_warmup = 0.3\n" + extra
    )
    return str(path)


def test_cli_run_ok(tmp_path, capsys):
    code = main(["run", _write_scenario(tmp_path), "--out", str(tmp_path / "out")])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["name"] == "cli_hover"
    assert (tmp_path / "out" / "cli_hover" / "metrics.json").exists()


def test_cli_run_crash_exit_code(tmp_path, capsys):
    path = _write_scenario(tmp_path, extra="sim.ground_clearance = 0.6\n")
    code = main(["run", path])
    assert code == EXIT_CRASH


def test_cli_run_config_error(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("seed = not_an_int\nduration = 1.0\n")
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_cli_identify_fg_samples(tmp_path, capsys):
    ge = GroundEffectParams()
    h = np.linspace(0.05, 1.2, 40)
    rows = ["h,f"] + [f"{x},{thrust_factor(x, ge)}" for x in h]
    path = tmp_path / "fg.csv"
    path.write_text("\n".join(rows) + "\n")
    code = main(["identify", "fg", str(path), "--out", str(tmp_path / "fit")])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "g1" in out
    report = json.loads((tmp_path / "fit" / "fit_fg.json").read_text())
    assert abs(report["params"]["g1"] - ge.g1) < 1e-6


def test_cli_identify_mg_samples(tmp_path):
    ge = GroundEffectParams()
    rng = np.random.default_rng(2)
    h = np.sort(rng.uniform(0.05, 1.0, 60))
    tilt = np.radians(rng.uniform(1.0, 9.0, 60))
    thrust = rng.uniform(5.0, 9.0, 60)
    tau = [torque_lever(x, ge) * T * math.sin(d) for x, d, T in zip(h, tilt, thrust)]
    rows = ["h,tilt,thrust,torque"] + [
        f"{a},{b},{c},{d}" for a, b, c, d in zip(h, tilt, thrust, tau)
    ]
    path = tmp_path / "mg.csv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["identify", "mg", str(path)]) == EXIT_OK


def test_cli_identify_fit_failure_exit_code(tmp_path):
    rows = ["h,f"] + [f"0.3,{0.2}" for _ in range(20)]
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(rows) + "\n")
    assert main(["identify", "fg", str(path)]) == EXIT_FIT


def test_cli_compare(tmp_path, capsys):
    a = MetricsReport("a", "hover()", 1, 6.0, 8.0, 10.0, 15.0, 2.0, 0.02, False, False)
    b = MetricsReport("b", "hover()", 1, 3.0, 4.0, 5.0, 8.0, 1.0, 0.01, False, False)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    pa.write_text(a.to_json())
    pb.write_text(b.to_json())
    code = main(["compare", str(pa), str(pb), "--baseline", "a", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert "50.0" in capsys.readouterr().out
    assert (tmp_path / "comparison.csv").exists()


def test_cli_oracle_all(capsys):
    assert main(["oracle", "all"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
