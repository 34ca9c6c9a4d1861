"""Batch experiment harness: scenarios, metrics, error profiles, comparisons.

A scenario bundles a trajectory, controller configuration, simulation
config and seed. Running one produces a TrajectoryLog and a MetricsReport
and, when an output directory is given, writes scenario.resolved, log.csv
and metrics.json there for reproducibility audits.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import KeyValueConfig
from .controller import CascadeController, ControlGains, FeedforwardController
from .errors import ConfigError, InputError
from .flatness import make_trajectory
from .groundeffect import GroundEffectParams
from .simulator import SimConfig, TrajectoryLog, run_closed_loop
from .vehicle import VehicleParams


@dataclass
class Scenario:
    """Fully resolved description of one simulation experiment."""

    name: str
    seed: int
    duration: float
    trajectory_kind: str = "hover"
    trajectory_params: dict = field(default_factory=dict)
    controller_kind: str = "cascade"      # or "feedforward"
    gains: ControlGains = field(default_factory=ControlGains)
    sim: SimConfig = field(default_factory=SimConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    ge: GroundEffectParams = field(default_factory=GroundEffectParams)
    mismatch: float = 1.0                 # controller ground-effect model scale
    metrics_warmup: float = 1.0           # seconds trimmed before metrics

    def trajectory_spec(self):
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.trajectory_params.items()))
        return f"{self.trajectory_kind}({inner})"

    def build(self):
        trajectory = make_trajectory(self.trajectory_kind, **self.trajectory_params)
        if self.controller_kind == "feedforward":
            controller = FeedforwardController(
                trajectory, self.vehicle, self.ge, gravity=self.sim.gravity,
                command_lead=0.5 / self.sim.attitude_rate,
            )
        elif self.controller_kind == "cascade":
            controller = CascadeController(
                trajectory, self.vehicle, self.ge, self.gains,
                attitude_rate=self.sim.attitude_rate,
                position_rate=self.sim.position_rate,
                gravity=self.sim.gravity,
                model_mismatch=self.mismatch,
            )
        else:
            raise ConfigError(f"unknown controller kind {self.controller_kind!r}")
        return trajectory, controller

    # -- config io ------------------------------------------------------------

    @classmethod
    def from_file(cls, path, overrides=None):
        cfg = KeyValueConfig.from_path(path)
        if overrides:
            cfg = cfg.merged_with(overrides)
        return cls.from_config(cfg, default_name=os.path.splitext(os.path.basename(path))[0])

    @classmethod
    def from_config(cls, cfg: KeyValueConfig, default_name="scenario"):
        vehicle_cfg = KeyValueConfig([], source="defaults")
        if "vehicle_file" in cfg:
            vehicle_cfg = KeyValueConfig.from_path(cfg.get_str("vehicle_file"))
        vehicle_cfg = vehicle_cfg.merged_with(cfg.subset("vehicle"))
        ge_cfg = KeyValueConfig([], source="defaults")
        if "ge_file" in cfg:
            ge_cfg = KeyValueConfig.from_path(cfg.get_str("ge_file"))
        ge_cfg = ge_cfg.merged_with(cfg.subset("ge"))

        traj_kind = cfg.get_str("trajectory", "hover")
        traj_params = {}
        for key, _, _ in cfg.subset("traj").entries:
            traj_params[key] = cfg.subset("traj").get_float(key)

        sim = SimConfig(
            dt=cfg.get_float("sim.dt", 5.0e-4),
            attitude_rate=cfg.get_float("sim.attitude_rate", 500.0),
            position_rate=cfg.get_float("sim.position_rate", 100.0),
            gravity=cfg.get_float("sim.gravity", 9.81),
            ge_force=cfg.get_bool("sim.ge_force", True),
            ge_torque=cfg.get_bool("sim.ge_torque", True),
            ge_drag=cfg.get_bool("sim.ge_drag", True),
            torque_formulation=cfg.get_str("sim.torque_formulation", "explicit"),
            motor_tau=cfg.get_float("sim.motor_tau", 0.030),
            noise_accel=cfg.get_float("sim.noise_accel", 0.0),
            noise_gyro=cfg.get_float("sim.noise_gyro", 0.0),
            ext_force=np.array(cfg.get_floats("sim.ext_force", [0.0, 0.0, 0.0], n=3)),
            ext_torque=np.array(cfg.get_floats("sim.ext_torque", [0.0, 0.0, 0.0], n=3)),
            ext_on=cfg.get_float("sim.ext_on", 0.0),
            ext_off=cfg.get_float("sim.ext_off", math.inf),
            ground_clearance=cfg.get_float("sim.ground_clearance", 0.02),
            log_decimation=cfg.get_int("sim.log_decimation", 1),
        )
        gains = ControlGains(
            kp=cfg.get_floats("ctrl.kp", [6.0, 6.0, 8.0], n=3),
            kv=cfg.get_floats("ctrl.kv", [4.0, 4.0, 5.0], n=3),
            kxi=cfg.get_floats("ctrl.kxi", [12.0, 12.0, 8.0], n=3),
            komega=cfg.get_floats("ctrl.komega", [60.0, 60.0, 40.0], n=3),
            accel_comp=cfg.get_str("ctrl.accel_comp", "model"),
            torque_comp=cfg.get_str("ctrl.torque_comp", "hybrid"),
            gyro_cutoff=cfg.get_float("ctrl.gyro_cutoff", 40.0),
            observer_cutoff=cfg.get_float("ctrl.observer_cutoff", 20.0),
        )
        return cls(
            name=cfg.get_str("name", default_name),
            seed=cfg.get_int("seed"),
            duration=cfg.get_float("duration"),
            trajectory_kind=traj_kind,
            trajectory_params=traj_params,
            controller_kind=cfg.get_str("controller", "cascade"),
            gains=gains,
            sim=sim,
            vehicle=VehicleParams.from_config(vehicle_cfg),
            ge=GroundEffectParams.from_config(ge_cfg),
            mismatch=cfg.get_float("mismatch", 1.0),
            metrics_warmup=cfg.get_float("metrics_warmup", 1.0),
        )

    def resolved_text(self):
        lines = [
            f"name = {self.name}",
            f"seed = {self.seed}",
            f"duration = {self.duration}",
            f"trajectory = {self.trajectory_kind}",
        ]
        for key in sorted(self.trajectory_params):
            lines.append(f"traj.{key} = {self.trajectory_params[key]}")
        lines.append(f"controller = {self.controller_kind}")
        g = self.gains
        lines += [
            "ctrl.kp = " + ", ".join("%g" % v for v in g.kp),
            "ctrl.kv = " + ", ".join("%g" % v for v in g.kv),
            "ctrl.kxi = " + ", ".join("%g" % v for v in g.kxi),
            "ctrl.komega = " + ", ".join("%g" % v for v in g.komega),
            f"ctrl.accel_comp = {g.accel_comp}",
            f"ctrl.torque_comp = {g.torque_comp}",
            f"ctrl.gyro_cutoff = {g.gyro_cutoff}",
            f"ctrl.observer_cutoff = {g.observer_cutoff}",
        ]
        s = self.sim
        lines += [
            f"sim.dt = {s.dt}",
            f"sim.attitude_rate = {s.attitude_rate}",
            f"sim.position_rate = {s.position_rate}",
            f"sim.gravity = {s.gravity}",
            f"sim.ge_force = {str(s.ge_force).lower()}",
            f"sim.ge_torque = {str(s.ge_torque).lower()}",
            f"sim.ge_drag = {str(s.ge_drag).lower()}",
            f"sim.torque_formulation = {s.torque_formulation}",
            f"sim.motor_tau = {s.motor_tau}",
            f"sim.noise_accel = {s.noise_accel}",
            f"sim.noise_gyro = {s.noise_gyro}",
            "sim.ext_force = " + ", ".join("%g" % v for v in s.ext_force),
            "sim.ext_torque = " + ", ".join("%g" % v for v in s.ext_torque),
            f"sim.ext_on = {s.ext_on}",
            f"sim.ext_off = {s.ext_off}",
            f"sim.ground_clearance = {s.ground_clearance}",
            f"sim.log_decimation = {s.log_decimation}",
            f"mismatch = {self.mismatch}",
            f"metrics_warmup = {self.metrics_warmup}",
            f"vehicle.mass = {self.vehicle.m}",
            f"vehicle.wheelbase = {self.vehicle.b}",
            f"vehicle.k_t = {self.vehicle.k_t}",
            f"vehicle.k_tx = {self.vehicle.k_tx}",
            f"vehicle.k_ty = {self.vehicle.k_ty}",
            f"vehicle.k_i = {self.vehicle.k_i}",
            f"vehicle.n_max = {self.vehicle.n_max}",
            f"vehicle.rotor_plane_offset = {self.vehicle.rotor_plane_offset}",
            f"ge.g1 = {self.ge.g1}",
            f"ge.g2 = {self.ge.g2}",
            f"ge.g3 = {self.ge.g3}",
            f"ge.g4 = {self.ge.g4}",
            f"ge.g5 = {self.ge.g5}",
            f"ge.tilt_saturation_deg = {self.ge.tilt_saturation_deg}",
        ]
        for row in self.ge.drag_table:
            lines.append("ge.drag_sample = %g, %g, %g" % tuple(row))
        return "\n".join(lines) + "\n"


@dataclass
class MetricsReport:
    name: str
    trajectory: str
    seed: int
    rmse_xoy_cm: float
    rmse_z_cm: float
    rmse_all_cm: float
    max_ep_cm: float
    std_ep_cm: float
    attitude_rmse_rad: float
    crashed: bool
    infeasible: bool
    angle_profile: list = field(default_factory=list)   # (h0, E) pairs

    def to_dict(self):
        return {
            "name": self.name,
            "trajectory": self.trajectory,
            "seed": self.seed,
            "rmse_xoy_cm": self.rmse_xoy_cm,
            "rmse_z_cm": self.rmse_z_cm,
            "rmse_all_cm": self.rmse_all_cm,
            "max_ep_cm": self.max_ep_cm,
            "std_ep_cm": self.std_ep_cm,
            "attitude_rmse_rad": self.attitude_rmse_rad,
            "crashed": self.crashed,
            "infeasible": self.infeasible,
            "angle_profile": [[float(h), float(e)] for h, e in self.angle_profile],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            name=d["name"],
            trajectory=d["trajectory"],
            seed=d["seed"],
            rmse_xoy_cm=d["rmse_xoy_cm"],
            rmse_z_cm=d["rmse_z_cm"],
            rmse_all_cm=d["rmse_all_cm"],
            max_ep_cm=d["max_ep_cm"],
            std_ep_cm=d["std_ep_cm"],
            attitude_rmse_rad=d["attitude_rmse_rad"],
            crashed=d["crashed"],
            infeasible=d["infeasible"],
            angle_profile=[tuple(p) for p in d.get("angle_profile", [])],
        )


def attitude_errors(log: TrajectoryLog):
    """Per-row rotation angle between the true and commanded attitudes."""
    q = log.cols(["qw", "qx", "qy", "qz"])
    qd = log.cols(["cmd_qw", "cmd_qx", "cmd_qy", "cmd_qz"])
    dots = np.abs(np.sum(q * qd, axis=1))
    return 2.0 * np.arccos(np.minimum(dots, 1.0))


def compute_metrics(log: TrajectoryLog, scenario: Scenario):
    """Table-style tracking metrics over the post-warmup part of the log."""
    trimmed = log.after(scenario.metrics_warmup)
    if len(trimmed) == 0:
        trimmed = log
    err = trimmed.cols(["px", "py", "pz"]) - trimmed.cols(["ref_px", "ref_py", "ref_pz"])
    norms = np.linalg.norm(err, axis=1)
    rmse_xoy = math.sqrt(float(np.mean(err[:, 0] ** 2 + err[:, 1] ** 2)))
    rmse_z = math.sqrt(float(np.mean(err[:, 2] ** 2)))
    rmse_all = math.sqrt(float(np.mean(norms**2)))
    ang = attitude_errors(trimmed)
    return MetricsReport(
        name=scenario.name,
        trajectory=scenario.trajectory_spec(),
        seed=scenario.seed,
        rmse_xoy_cm=100.0 * rmse_xoy,
        rmse_z_cm=100.0 * rmse_z,
        rmse_all_cm=100.0 * rmse_all,
        max_ep_cm=100.0 * float(np.max(norms)),
        std_ep_cm=100.0 * float(np.std(norms)),
        attitude_rmse_rad=math.sqrt(float(np.mean(ang**2))),
        crashed=log.crashed,
        infeasible=log.infeasible,
    )


def angle_error_profile(log: TrajectoryLog, half_width=0.02, step=None, min_samples=10):
    """Attitude-error RMS binned by altitude.

    E(h0) is the RMS rotation angle between true and commanded attitude over
    rows with h within half_width of h0; windows with fewer than min_samples
    rows are dropped. Returns an (n, 2) array of (h0, E).
    """
    if len(log) == 0:
        raise InputError("empty log")
    ang = attitude_errors(log)
    h = log.col("h")
    if step is None:
        step = half_width
    grid = np.arange(h.min() + half_width, h.max() - half_width + 1e-12, step)
    out = []
    for h0 in grid:
        mask = (h >= h0 - half_width) & (h <= h0 + half_width)
        if int(mask.sum()) >= min_samples:
            out.append((float(h0), math.sqrt(float(np.mean(ang[mask] ** 2)))))
    return np.array(out).reshape(-1, 2)


def run(scenario: Scenario, out_dir=None):
    """Execute one scenario; optionally write its artifact directory."""
    _, controller = scenario.build()
    log = run_closed_loop(
        controller, scenario.vehicle, scenario.ge, scenario.sim,
        scenario.duration, seed=scenario.seed,
    )
    metrics = compute_metrics(log, scenario)
    if scenario.trajectory_kind == "hover_descent" and not log.crashed:
        profile = angle_error_profile(log.after(scenario.metrics_warmup))
        metrics.angle_profile = [tuple(row) for row in profile]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "scenario.resolved"), "w", encoding="utf-8") as fh:
            fh.write(scenario.resolved_text())
        log.to_csv(os.path.join(out_dir, "log.csv"))
        with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
            fh.write(metrics.to_json() + "\n")
    return log, metrics


def _sweep_worker(args):
    path, overrides_entries, out_dir = args
    overrides = KeyValueConfig(overrides_entries, source="<sweep>")
    scenario = Scenario.from_file(path, overrides=overrides)
    _, metrics = run(scenario, out_dir=out_dir)
    return metrics


def sweep(scenario_path, param, values, out_root=None, jobs=1, seed=None):
    """Run one scenario once per parameter value; independent runs may use workers."""
    tasks = []
    for value in values:
        entries = [(param, str(value), 0)]
        if seed is not None:
            entries.append(("seed", str(seed), 0))
        out_dir = None
        if out_root is not None:
            safe = str(value).replace("/", "_")
            out_dir = os.path.join(out_root, f"{param.replace('.', '_')}={safe}")
        tasks.append((scenario_path, entries, out_dir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_worker, tasks))
    return [_sweep_worker(task) for task in tasks]


class ComparisonTable:
    """Side-by-side metric table with percent improvement over a baseline."""

    HEADERS = ["name", "rmse_xoy_cm", "rmse_z_cm", "rmse_all_cm", "max_ep_cm",
               "std_ep_cm", "reduction_vs_baseline_pct"]

    def __init__(self, rows, baseline_name, mismatched):
        self.rows = rows
        self.baseline_name = baseline_name
        self.mismatched_trajectories = mismatched

    def to_csv(self):
        lines = [",".join(self.HEADERS)]
        for row in self.rows:
            lines.append(
                "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.2f"
                % (row["name"], row["rmse_xoy_cm"], row["rmse_z_cm"], row["rmse_all_cm"],
                   row["max_ep_cm"], row["std_ep_cm"], row["reduction_pct"])
            )
        return "\n".join(lines) + "\n"

    def to_text(self):
        widths = [28, 12, 10, 10, 10, 10, 12]
        head = ["scenario", "RMSE XOY", "RMSE Z", "RMSE all", "max|E|", "std|E|", "vs base %"]
        out = ["".join(h.ljust(w) for h, w in zip(head, widths))]
        for row in self.rows:
            cells = [
                row["name"][:27],
                "%.3f" % row["rmse_xoy_cm"],
                "%.3f" % row["rmse_z_cm"],
                "%.3f" % row["rmse_all_cm"],
                "%.3f" % row["max_ep_cm"],
                "%.3f" % row["std_ep_cm"],
                "%.1f" % row["reduction_pct"],
            ]
            out.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
        if self.mismatched_trajectories:
            out.append("warning: reports cover different trajectories "
                       f"({', '.join(sorted(self.mismatched_trajectories))})")
        out.append(f"baseline: {self.baseline_name} (units: cm)")
        return "\n".join(out) + "\n"


def compare(reports, baseline=None):
    """Comparison across metric reports; reduction is in total RMSE."""
    if not reports:
        raise InputError("need at least one report")
    base = reports[0] if baseline is None else next(
        (r for r in reports if r.name == baseline), None
    )
    if base is None:
        raise InputError(f"baseline {baseline!r} not among the reports")
    specs = {r.trajectory for r in reports}
    rows = []
    for r in reports:
        reduction = 0.0
        if base.rmse_all_cm > 0.0:
            reduction = 100.0 * (1.0 - r.rmse_all_cm / base.rmse_all_cm)
        rows.append(
            {
                "name": r.name,
                "rmse_xoy_cm": r.rmse_xoy_cm,
                "rmse_z_cm": r.rmse_z_cm,
                "rmse_all_cm": r.rmse_all_cm,
                "max_ep_cm": r.max_ep_cm,
                "std_ep_cm": r.std_ep_cm,
                "reduction_pct": reduction,
            }
        )
    mismatched = specs if len(specs) > 1 else set()
    return ComparisonTable(rows, base.name, mismatched)


def write_series_csv(path, columns, arrays):
    """Plot-ready x/y series emission (one column per array)."""
    data = np.column_stack(arrays)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
