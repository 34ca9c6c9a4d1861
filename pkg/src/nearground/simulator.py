"""Deterministic rigid-body simulation with ground-effect disturbances.

RK4 over position, velocity, attitude quaternion, body rates, and rotor
speeds (first-order motor lag). The ground-effect force, leveling torque,
and altitude drag can be toggled individually; the rotational dynamics can
also run in the equivalent-inertia form where the leveling torque is
absorbed into J'(h) instead of appearing explicitly.

All randomness flows from one seeded generator per run; identical config
and seed reproduce logs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quaternions as quat
from .errors import ConfigError, SimulationFault
from .groundeffect import (
    GroundEffectParams,
    added_thrust_force,
    drag_force,
    equivalent_inertia,
    leveling_torque,
)
from .vehicle import GRAVITY, VehicleParams, build_mixing_matrix

Z_W = np.array([0.0, 0.0, 1.0])

# state vector layout
_P = slice(0, 3)
_V = slice(3, 6)
_Q = slice(6, 10)
_W = slice(10, 13)
_N = slice(13, 17)
STATE_SIZE = 17


@dataclass
class RigidState:
    """Vehicle state snapshot; quaternion is world-from-body, speeds in rpm."""

    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    rotor_speeds: np.ndarray

    def to_vector(self):
        return np.concatenate([self.p, self.v, self.q, self.omega, self.rotor_speeds])

    @classmethod
    def from_vector(cls, x):
        return cls(x[_P].copy(), x[_V].copy(), x[_Q].copy(), x[_W].copy(), x[_N].copy())


@dataclass
class SimConfig:
    dt: float = 5.0e-4                 # physics step, s
    attitude_rate: float = 500.0       # inner control loop, Hz
    position_rate: float = 100.0       # outer control loop, Hz
    gravity: float = GRAVITY
    ge_force: bool = True
    ge_torque: bool = True
    ge_drag: bool = True
    torque_formulation: str = "explicit"   # or "equivalent"
    motor_tau: float = 0.030           # s; 0 means speeds track commands exactly
    noise_accel: float = 0.0           # m/s^2, std per axis
    noise_gyro: float = 0.0            # rad/s, std per axis
    ext_force: np.ndarray = None       # constant world force, N
    ext_torque: np.ndarray = None      # constant body torque, N m
    ext_on: float = 0.0                # external wrench active from this time
    ext_off: float = math.inf
    ground_clearance: float = 0.02     # crash when the lowest rotor tip reaches this
    log_decimation: int = 1

    def __post_init__(self):
        self.ext_force = np.zeros(3) if self.ext_force is None else np.asarray(self.ext_force, float)
        self.ext_torque = np.zeros(3) if self.ext_torque is None else np.asarray(self.ext_torque, float)
        if self.dt <= 0.0:
            raise ConfigError("physics step must be positive")
        if self.torque_formulation not in ("explicit", "equivalent"):
            raise ConfigError(f"unknown torque formulation {self.torque_formulation!r}")
        for rate in (self.attitude_rate, self.position_rate):
            period = 1.0 / rate
            steps = period / self.dt
            if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
                raise ConfigError(
                    f"control period 1/{rate} Hz must be an integer multiple of dt={self.dt}"
                )
        if self.attitude_rate % self.position_rate != 0:
            raise ConfigError("attitude rate must be an integer multiple of the position rate")

    def steps_per_attitude_tick(self):
        return round(1.0 / (self.attitude_rate * self.dt))

    def attitude_ticks_per_position_tick(self):
        return round(self.attitude_rate / self.position_rate)


@dataclass
class Measurement:
    """What the controller sees at a control tick."""

    t: float
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    gyro: np.ndarray            # body rates + noise
    specific_force: np.ndarray  # body-frame accelerometer reading + noise
    rotor_speeds: np.ndarray


class _Plant:
    """Precomputed constants for fast derivative evaluation."""

    __slots__ = (
        "M", "J", "Jinv", "J_diagonal", "Jdiag", "m", "g", "offset", "b",
        "g1", "g2", "g3", "g4", "g5", "sin_sat", "t_h", "t_dx", "t_dy",
        "ge_force", "ge_torque", "ge_drag", "equivalent", "motor_tau",
        "ext_force", "ext_torque", "ext_on", "ext_off", "weight",
    )

    def __init__(self, vehicle: VehicleParams, ge: GroundEffectParams, cfg: SimConfig):
        self.M = build_mixing_matrix(vehicle)
        self.J = vehicle.inertia
        self.Jinv = np.linalg.inv(self.J)
        self.Jdiag = np.diag(self.J).copy()
        self.J_diagonal = bool(np.count_nonzero(self.J - np.diag(self.Jdiag)) == 0)
        self.m = vehicle.m
        self.g = cfg.gravity
        self.offset = vehicle.rotor_plane_offset
        self.b = vehicle.b
        self.g1, self.g2 = ge.g1, ge.g2
        self.g3, self.g4, self.g5 = ge.g3, ge.g4, ge.g5
        self.sin_sat = (
            math.sin(math.radians(ge.tilt_saturation_deg))
            if ge.tilt_saturation_deg > 0.0
            else math.inf
        )
        self.t_h = ge.drag_table[:, 0].copy()
        self.t_dx = ge.drag_table[:, 1].copy()
        self.t_dy = ge.drag_table[:, 2].copy()
        self.ge_force = cfg.ge_force
        self.ge_torque = cfg.ge_torque
        self.ge_drag = cfg.ge_drag
        self.equivalent = cfg.torque_formulation == "equivalent"
        self.motor_tau = cfg.motor_tau
        self.ext_force = cfg.ext_force
        self.ext_torque = cfg.ext_torque
        self.ext_on = cfg.ext_on
        self.ext_off = cfg.ext_off
        self.weight = np.array([0.0, 0.0, -vehicle.m * cfg.gravity])

    def derivative(self, x, n_cmd, t):
        q = x[_Q]
        qn = q / math.sqrt(float(q @ q))
        R = quat.rot_matrix(qn)
        omega = x[_W]
        n = x[_N]

        wrench = self.M @ (n * n)
        thrust = wrench[0]
        h = x[2] + self.offset
        z_b = R[:, 2]

        force = self.weight + thrust * z_b
        tau = wrench[1:4]
        if self.ext_on <= t < self.ext_off:
            force = force + self.ext_force
            tau = tau + self.ext_torque

        lever_t = 0.0
        if h > 0.0:
            if self.ge_force:
                force = force + (self.g2 / (h * h + self.g1)) * thrust * z_b
            if self.ge_drag:
                dx = np.interp(h, self.t_h, self.t_dx)
                dy = np.interp(h, self.t_h, self.t_dy)
                v_b = R.T @ x[_V]
                force = force - R @ np.array([dx * v_b[0], dy * v_b[1], 0.0])
            if self.ge_torque:
                den = h * h + self.g3 * h + self.g4
                lever_t = self.g5 * h / (den * den) * thrust

        if self.equivalent:
            added = lever_t * lever_t / (self.m * self.g * self.g)
            torque_net = tau - np.cross(omega, self._jp_mul(omega, added))
            if self.J_diagonal:
                wdot = torque_net / (self.Jdiag + np.array([added, added, 0.0]))
            else:
                Jp = self.J.copy()
                Jp[0, 0] += added
                Jp[1, 1] += added
                wdot = np.linalg.solve(Jp, torque_net)
        else:
            if lever_t > 0.0:
                axis = R.T @ np.array([z_b[1], -z_b[0], 0.0])
                s = math.sqrt(float(axis @ axis))
                if s > self.sin_sat:
                    axis *= self.sin_sat / s
                tau = tau + lever_t * axis
            wdot = self.Jinv @ (tau - np.cross(omega, self.J @ omega))

        xdot = np.empty(STATE_SIZE)
        xdot[_P] = x[_V]
        xdot[_V] = force / self.m
        xdot[_W] = wdot
        w1, w2, w3 = omega
        qw, qx, qy, qz = qn
        xdot[6] = 0.5 * (-qx * w1 - qy * w2 - qz * w3)
        xdot[7] = 0.5 * (qw * w1 + qy * w3 - qz * w2)
        xdot[8] = 0.5 * (qw * w2 - qx * w3 + qz * w1)
        xdot[9] = 0.5 * (qw * w3 + qx * w2 - qy * w1)
        if self.motor_tau > 0.0:
            xdot[_N] = (n_cmd - n) / self.motor_tau
        else:
            xdot[_N] = 0.0
        return xdot

    def _jp_mul(self, w, added):
        out = self.J @ w if not self.J_diagonal else self.Jdiag * w
        return out + np.array([added * w[0], added * w[1], 0.0])

    def rk4(self, x, n_cmd, dt, t):
        if self.motor_tau <= 0.0:
            x = x.copy()
            x[_N] = n_cmd
        k1 = self.derivative(x, n_cmd, t)
        k2 = self.derivative(x + (0.5 * dt) * k1, n_cmd, t + 0.5 * dt)
        k3 = self.derivative(x + (0.5 * dt) * k2, n_cmd, t + 0.5 * dt)
        k4 = self.derivative(x + dt * k3, n_cmd, t + dt)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[_Q] /= math.sqrt(float(out[_Q] @ out[_Q]))
        if not np.all(np.isfinite(out)):
            raise SimulationFault(f"non-finite state at t={t:.6f}: {out}")
        return out


def disturbance_forces(x, vehicle: VehicleParams, ge: GroundEffectParams, cfg: SimConfig):
    """(f_ge, f_drag, tau_level) acting on the state, honoring the toggles."""
    q = x[_Q]
    R = quat.rot_matrix(q / math.sqrt(float(q @ q)))
    n = x[_N]
    thrust = vehicle.k_t * float(n @ n)
    h = x[2] + vehicle.rotor_plane_offset
    f_ge = np.zeros(3)
    f_drag = np.zeros(3)
    tau_level = np.zeros(3)
    if h > 0.0:
        if cfg.ge_force:
            f_ge = added_thrust_force(R, thrust, h, ge)
        if cfg.ge_drag:
            f_drag = drag_force(R, x[_V], h, ge)
        if cfg.ge_torque and cfg.torque_formulation == "explicit":
            tau_level = leveling_torque(R, thrust, h, ge)
    return f_ge, f_drag, tau_level


def state_derivative(x, n_cmd, vehicle: VehicleParams, ge: GroundEffectParams,
                     cfg: SimConfig, t=0.0):
    """Time derivative of the packed state under commanded rotor speeds."""
    return _Plant(vehicle, ge, cfg).derivative(np.asarray(x, float), n_cmd, t)


def step(x, n_cmd, dt, vehicle: VehicleParams, ge: GroundEffectParams, cfg: SimConfig,
         t=0.0, _plant=None):
    """One RK4 step; renormalizes the quaternion, checks for non-finite states."""
    plant = _plant if _plant is not None else _Plant(vehicle, ge, cfg)
    return plant.rk4(np.asarray(x, float), n_cmd, dt, t)


def imu_sample(x, xdot, cfg: SimConfig, rng):
    """(body specific force, body rates), Gaussian noise from the run generator.

    The accelerometer reading is R^T(a + g z_W): at rest it reports +g along
    body z, and rotating it into the world frame makes the disturbance
    observer identity exact at zero noise.
    """
    q = x[_Q]
    R = quat.rot_matrix(q / math.sqrt(float(q @ q)))
    f_body = R.T @ (xdot[_V] + cfg.gravity * Z_W)
    gyro = x[_W].copy()
    if cfg.noise_accel > 0.0:
        f_body = f_body + cfg.noise_accel * rng.standard_normal(3)
    if cfg.noise_gyro > 0.0:
        gyro = gyro + cfg.noise_gyro * rng.standard_normal(3)
    return f_body, gyro


# -- trajectory log ----------------------------------------------------------

_STATE_COLS = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz",
    "wx", "wy", "wz", "n1", "n2", "n3", "n4", "h",
]
_REF_COLS = [
    "ref_px", "ref_py", "ref_pz", "ref_vx", "ref_vy", "ref_vz",
    "ref_ax", "ref_ay", "ref_az", "ref_qw", "ref_qx", "ref_qy", "ref_qz",
    "ref_wx", "ref_wy", "ref_wz", "ref_T",
]
_CMD_COLS = ["cmd_T", "cmd_taux", "cmd_tauy", "cmd_tauz",
             "cmd_n1", "cmd_n2", "cmd_n3", "cmd_n4", "cmd_sat",
             "cmd_qw", "cmd_qx", "cmd_qy", "cmd_qz"]
_OBS_COLS = ["obs_aext_x", "obs_aext_y", "obs_aext_z",
             "obs_tauext_x", "obs_tauext_y", "obs_tauext_z"]
_DIST_COLS = ["fg_x", "fg_y", "fg_z", "fd_x", "fd_y", "fd_z",
              "taug_x", "taug_y", "taug_z"]

LOG_COLUMNS = _STATE_COLS + _REF_COLS + _CMD_COLS + _OBS_COLS + _DIST_COLS


class TrajectoryLog:
    """Fixed-column run record with exact CSV round-tripping."""

    columns = LOG_COLUMNS

    def __init__(self, data, crashed=False, infeasible=False, seed=0):
        self.data = np.asarray(data, dtype=float).reshape(-1, len(LOG_COLUMNS))
        self.crashed = bool(crashed)
        self.infeasible = bool(infeasible)
        self.seed = int(seed)
        self._index = {name: i for i, name in enumerate(LOG_COLUMNS)}

    def __len__(self):
        return self.data.shape[0]

    def col(self, name):
        return self.data[:, self._index[name]]

    def cols(self, names):
        return self.data[:, [self._index[n] for n in names]]

    def decimated(self, factor):
        return TrajectoryLog(self.data[::factor].copy(), self.crashed,
                             self.infeasible, self.seed)

    def after(self, t0):
        """Rows with t >= t0 (warmup trimming for metrics)."""
        mask = self.col("t") >= t0
        return TrajectoryLog(self.data[mask].copy(), self.crashed,
                             self.infeasible, self.seed)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                f"# crashed={int(self.crashed)} infeasible={int(self.infeasible)} "
                f"seed={self.seed}\n"
            )
            fh.write(",".join(LOG_COLUMNS) + "\n")
            for row in self.data:
                fh.write(",".join("%.17g" % v for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            meta = fh.readline().strip()
            header = fh.readline().strip().split(",")
            if header != LOG_COLUMNS:
                raise ConfigError(f"{path}: unexpected log columns")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        fields = dict(part.split("=") for part in meta.lstrip("# ").split())
        return cls(
            data,
            crashed=bool(int(fields.get("crashed", "0"))),
            infeasible=bool(int(fields.get("infeasible", "0"))),
            seed=int(fields.get("seed", "0")),
        )


def hover_initial_state(trajectory, vehicle: VehicleParams, ge: GroundEffectParams,
                        gravity=GRAVITY):
    """Packed state matching the trajectory reference at t = 0."""
    from .flatness import flat_reference

    flat = trajectory(0.0)
    ref = flat_reference(flat, vehicle, ge, gravity)
    x = np.empty(STATE_SIZE)
    x[_P] = flat.p
    x[_V] = flat.v
    x[_Q] = ref.attitude
    x[_W] = ref.omega
    x[_N] = ref.rotor_speeds
    return x


def run_closed_loop(controller, vehicle: VehicleParams, ge: GroundEffectParams,
                    cfg: SimConfig, duration, seed=0, x0=None):
    """Step physics at dt, call the controller at its rate, record the log.

    The controller object must provide tick(t, Measurement) -> command with
    fields thrust, torque, rotor_speeds, saturated, plus last_reference
    (FlatReference), last_flat (FlatOutput) and last_wrench (WrenchEstimate
    or None) for logging. Ground contact truncates the log and flags it.
    """
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = hover_initial_state(controller.trajectory, vehicle, ge, cfg.gravity)
    x = x0.copy()
    plant = _Plant(vehicle, ge, cfg)
    steps = int(round(duration / cfg.dt))
    per_tick = cfg.steps_per_attitude_tick()
    decim = max(1, int(cfg.log_decimation))
    rows = np.zeros((steps // decim + 1, len(LOG_COLUMNS)))
    n_rows = 0
    crashed = False
    infeasible = False
    command = None

    for k in range(steps + 1):
        t = k * cfg.dt
        if k % per_tick == 0:
            n_cmd = command.rotor_speeds if command is not None else x[_N]
            xdot = plant.derivative(x, n_cmd, t)
            f_imu, gyro = imu_sample(x, xdot, cfg, rng)
            meas = Measurement(t, x[_P].copy(), x[_V].copy(), x[_Q].copy(),
                               gyro, f_imu, x[_N].copy())
            command = controller.tick(t, meas)
            if controller.last_reference is not None and not controller.last_reference.feasible:
                infeasible = True
        if k % decim == 0:
            rows[n_rows] = _log_row(t, x, command, controller, vehicle, ge, cfg)
            n_rows += 1
        if k == steps:
            break
        x = plant.rk4(x, command.rotor_speeds, cfg.dt, t)
        h = x[2] + vehicle.rotor_plane_offset
        z_bz = 1.0 - 2.0 * (x[7] ** 2 + x[8] ** 2)  # z_B . z_W from quaternion
        tip = h - 0.5 * vehicle.b * math.sqrt(max(0.0, 1.0 - min(1.0, z_bz) ** 2))
        if tip <= cfg.ground_clearance:
            crashed = True
            break

    return TrajectoryLog(rows[:n_rows], crashed=crashed, infeasible=infeasible, seed=seed)


def _log_row(t, x, command, controller, vehicle, ge, cfg):
    row = np.zeros(len(LOG_COLUMNS))
    row[0] = t
    row[1:18] = x
    row[18] = x[2] + vehicle.rotor_plane_offset
    flat = controller.last_flat
    ref = controller.last_reference
    if ref is not None:
        row[19:22] = flat.p
        row[22:25] = flat.v
        row[25:28] = flat.a
        row[28:32] = ref.attitude
        row[32:35] = ref.omega
        row[35] = ref.thrust
    if command is not None:
        row[36] = command.thrust
        row[37:40] = command.torque
        row[40:44] = command.rotor_speeds
        row[44] = float(command.saturated)
    q_des = getattr(controller, "last_attitude_target", None)
    if q_des is not None:
        row[45:49] = q_des
    est = controller.last_wrench
    if est is not None:
        row[49:52] = est.accel
        row[52:55] = est.torque
    f_ge, f_drag, tau_level = disturbance_forces(x, vehicle, ge, cfg)
    row[55:58] = f_ge
    row[58:61] = f_drag
    row[61:64] = tau_level
    return row


def simulate_attitude(q0, omega0, torque_fn, vehicle: VehicleParams,
                      ge: GroundEffectParams, h, thrust, dt, duration,
                      formulation="explicit", gravity=GRAVITY):
    """Rotation-only integration at fixed altitude and thrust.

    torque_fn(t, q, omega) supplies the rotor torque. The explicit form
    applies the leveling torque to the plain inertia; the equivalent form
    uses J'(h) with no explicit torque. Returns (times, quats, omegas).
    """
    steps = int(round(duration / dt))
    if formulation == "explicit":
        J = vehicle.inertia
    else:
        J = equivalent_inertia(h, ge, vehicle, thrust=thrust, gravity=gravity)
    Jinv = np.linalg.inv(J)

    def deriv(t, q, w):
        tau = torque_fn(t, q, w)
        if formulation == "explicit":
            tau = tau + leveling_torque(quat.rot_matrix(q), thrust, h, ge)
        qd = quat.derivative(q, w)
        wd = Jinv @ (tau - np.cross(w, J @ w))
        return qd, wd

    times = np.empty(steps + 1)
    quats = np.empty((steps + 1, 4))
    omegas = np.empty((steps + 1, 3))
    q, w = np.asarray(q0, float).copy(), np.asarray(omega0, float).copy()
    for k in range(steps + 1):
        t = k * dt
        times[k], quats[k], omegas[k] = t, q, w
        if k == steps:
            break
        k1q, k1w = deriv(t, q, w)
        k2q, k2w = deriv(t + dt / 2, q + dt / 2 * k1q, w + dt / 2 * k1w)
        k3q, k3w = deriv(t + dt / 2, q + dt / 2 * k2q, w + dt / 2 * k2w)
        k4q, k4w = deriv(t + dt, q + dt * k3q, w + dt * k3w)
        q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        w = w + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        q = q / math.sqrt(float(q @ q))
    return times, quats, omegas
