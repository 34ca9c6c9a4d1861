"""Position/attitude/rate cascade with ground-effect compensation.

Acceleration command with model feedforward, quaternion attitude error,
body-rate loop, torque by model inversion with the altitude-dependent
inertia or by incremental inversion from the measured rotor torque, and
rotor-speed allocation with thrust-priority saturation handling.

A controller instance owns filter state and the last issued command; it is
stepped by one scenario runner and is not safe for concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quaternions as quat
from .errors import ControllerFault, InputError, ParameterError
from .estimation import FilteredDerivative, LowPass, WrenchObserverRunner
from .flatness import flat_reference
from .groundeffect import GroundEffectParams, drag_matrix, equivalent_inertia, thrust_factor
from .vehicle import VehicleParams, build_mixing_matrix, mixing_matrix_inverse

Z_W = np.array([0.0, 0.0, 1.0])

ACCEL_MODES = ("none", "indi", "model")
TORQUE_MODES = ("none", "model", "indi", "hybrid")


@dataclass
class ControlGains:
    kp: np.ndarray = None       # position, 1/s^2
    kv: np.ndarray = None       # velocity, 1/s
    kxi: np.ndarray = None      # attitude, 1/s
    komega: np.ndarray = None   # body rate, 1/s
    accel_comp: str = "model"
    torque_comp: str = "hybrid"
    gyro_cutoff: float = 40.0       # Hz, rate loop filters
    observer_cutoff: float = 20.0   # Hz, wrench observer filters

    def __post_init__(self):
        defaults = {
            "kp": [6.0, 6.0, 8.0],
            "kv": [4.0, 4.0, 5.0],
            "kxi": [12.0, 12.0, 8.0],
            "komega": [60.0, 60.0, 40.0],
        }
        for name, default in defaults.items():
            value = getattr(self, name)
            value = np.asarray(default if value is None else value, dtype=float).reshape(3)
            if np.any(value < 0.0):
                raise ParameterError(f"gain {name} must be non-negative")
            setattr(self, name, value)
        if self.accel_comp not in ACCEL_MODES:
            raise ParameterError(f"accel_comp must be one of {ACCEL_MODES}")
        if self.torque_comp not in TORQUE_MODES:
            raise ParameterError(f"torque_comp must be one of {TORQUE_MODES}")


@dataclass
class ControlCommand:
    thrust: float
    torque: np.ndarray
    rotor_speeds: np.ndarray
    saturated: bool = False
    yaw_shed: bool = False
    rp_shed: bool = False
    thrust_clipped: bool = False


# -- cascade stages ------------------------------------------------------------

def acceleration_command(flat, ref, p_hat, v_hat, gains: ControlGains,
                         vehicle: VehicleParams, ge: GroundEffectParams,
                         a_ext_est=None):
    """Desired acceleration: reference + PD error + disturbance compensation.

    Model mode removes the predicted drag and ground-force accelerations
    evaluated at the desired state; indi mode removes the observed external
    acceleration instead. Gravity is not included here.
    """
    a_des = (
        flat.a
        + gains.kp * (flat.p - np.asarray(p_hat, float))
        + gains.kv * (flat.v - np.asarray(v_hat, float))
    )
    if gains.accel_comp == "model":
        R = quat.rot_matrix(ref.attitude)
        h = flat.p[2] + vehicle.rotor_plane_offset
        a_drag = -(R @ drag_matrix(h, ge) @ (R.T @ flat.v)) / vehicle.m
        a_ground = (ref.thrust / vehicle.m) * thrust_factor(h, ge) * R[:, 2]
        a_des = a_des - a_drag - a_ground
    elif gains.accel_comp == "indi" and a_ext_est is not None:
        a_des = a_des - np.asarray(a_ext_est, float)
    return a_des


def attitude_error_vector(q_hat, q_des):
    """Body-frame rotation vector taking the estimate to the target.

    Error quaternion conj(q_hat) * q_des, sign-lifted to w >= 0, converted
    through the angle/axis map. Insensitive to the quaternion double cover.
    """
    for q in (q_hat, q_des):
        if abs(float(np.dot(q, q)) - 1.0) > 1e-6:
            raise InputError("attitude quaternions must be unit norm")
    e = quat.multiply(quat.conjugate(np.asarray(q_hat, float)), np.asarray(q_des, float))
    if e[0] < 0.0:
        e = -e
    w = min(e[0], 1.0)
    if 1.0 - w < 1e-8:
        return 2.0 * e[1:]
    return (2.0 * math.acos(w) / math.sqrt(1.0 - w * w)) * e[1:]


def bodyrate_command(xi_err, omega_ref, omega_f, omega_dot_ref, gains: ControlGains):
    """Desired body rate and rate derivative from the attitude error."""
    omega_des = gains.kxi * np.asarray(xi_err, float) + np.asarray(omega_ref, float)
    omega_dot_des = gains.komega * (omega_des - np.asarray(omega_f, float)) + np.asarray(
        omega_dot_ref, float
    )
    return omega_des, omega_dot_des


def thrust_command(a_des_total, z_b_hat, mass):
    """Thrust projecting the total desired specific force on the body axis."""
    z = np.asarray(z_b_hat, float)
    norm = math.sqrt(float(z @ z))
    if norm <= 0.0:
        raise InputError("body z axis must be non-zero")
    return max(0.0, mass * float(np.asarray(a_des_total, float) @ z) / norm)


def torque_command_model(omega_des, omega_dot_des, h, thrust_ref,
                         vehicle: VehicleParams, ge: GroundEffectParams,
                         use_equivalent_inertia=True):
    """Inverse rotational dynamics; J'(h) absorbs the leveling torque."""
    if use_equivalent_inertia:
        J = equivalent_inertia(h, ge, vehicle, thrust=thrust_ref)
    else:
        J = vehicle.inertia
    omega_des = np.asarray(omega_des, float)
    return J @ np.asarray(omega_dot_des, float) + np.cross(omega_des, J @ omega_des)


def torque_command_indi(tau_applied, omega_dot_des, omega_dot_f, h, thrust_ref,
                        vehicle: VehicleParams, ge: GroundEffectParams,
                        use_equivalent_inertia=True, age=0.0, period=0.002):
    """Incremental inversion: applied torque plus inertia-scaled rate-accel error."""
    if age > 2.0 * period + 1e-12:
        raise ControllerFault(
            f"applied-torque estimate is stale ({age:.4f}s > 2 control periods)"
        )
    if use_equivalent_inertia:
        J = equivalent_inertia(h, ge, vehicle, thrust=thrust_ref)
    else:
        J = vehicle.inertia
    return np.asarray(tau_applied, float) + J @ (
        np.asarray(omega_dot_des, float) - np.asarray(omega_dot_f, float)
    )


def _max_feasible_fraction(base, column, hi):
    """Largest f in [0,1] with base + f*column inside [0, hi], or None."""
    lower, upper = 0.0, 1.0
    for b, c in zip(base, column):
        if abs(c) < 1e-30:
            if b < -1e-9 or b > hi + 1e-9:
                return None
            continue
        l1, l2 = (0.0 - b) / c, (hi - b) / c
        lo_i, hi_i = (l1, l2) if l1 <= l2 else (l2, l1)
        lower = max(lower, lo_i)
        upper = min(upper, hi_i)
    if lower > upper + 1e-12:
        return None
    return max(0.0, upper)


def allocate(thrust_des, torque_des, vehicle: VehicleParams):
    """Rotor speeds realizing (T, tau), shedding yaw first under saturation.

    Unreachable commands degrade in order: scale yaw torque toward zero,
    then scale roll/pitch torque, then clamp the pure-thrust solution. The
    returned command always satisfies 0 <= n <= n_max.
    """
    torque_des = np.asarray(torque_des, float).reshape(3)
    thrust_des = max(0.0, float(thrust_des))
    Minv = mixing_matrix_inverse(vehicle)
    hi = vehicle.n_max**2
    n_sq = Minv @ np.concatenate(([thrust_des], torque_des))
    if np.all(n_sq >= -1e-9) and np.all(n_sq <= hi * (1.0 + 1e-12)):
        n = np.sqrt(np.clip(n_sq, 0.0, hi))
        tau = build_mixing_matrix(vehicle) @ (n * n)
        return ControlCommand(thrust_des, tau[1:4], n)

    yaw_shed = rp_shed = thrust_clipped = False
    base = Minv @ np.array([thrust_des, torque_des[0], torque_des[1], 0.0])
    ycol = Minv @ np.array([0.0, 0.0, 0.0, torque_des[2]])
    frac = _max_feasible_fraction(base, ycol, hi)
    if frac is not None:
        n_sq = base + frac * ycol
        yaw_shed = True
    else:
        yaw_shed = True
        rp_shed = True
        tcol = Minv @ np.array([thrust_des, 0.0, 0.0, 0.0])
        rpcol = Minv @ np.array([0.0, torque_des[0], torque_des[1], 0.0])
        frac = _max_feasible_fraction(tcol, rpcol, hi)
        if frac is not None:
            n_sq = tcol + frac * rpcol
        else:
            n_sq = np.clip(tcol, 0.0, hi)
            thrust_clipped = True
    n = np.sqrt(np.clip(n_sq, 0.0, hi))
    wrench = build_mixing_matrix(vehicle) @ (n * n)
    return ControlCommand(
        wrench[0], wrench[1:4], n,
        saturated=True, yaw_shed=yaw_shed, rp_shed=rp_shed, thrust_clipped=thrust_clipped,
    )


def applied_torque(rotor_speeds, vehicle: VehicleParams):
    """Body torque currently produced by the given rotor speeds."""
    n = np.asarray(rotor_speeds, float)
    return (build_mixing_matrix(vehicle) @ (n * n))[1:4]


# -- closed-loop controllers ----------------------------------------------------

class CascadeController:
    """Full cascade: position at the outer rate, attitude/rate at the inner rate.

    All feedforward models are evaluated at the desired state. The model
    copy of the ground-effect parameters may carry a multiplicative
    mismatch relative to the simulated truth.
    """

    def __init__(self, trajectory, vehicle: VehicleParams, ge: GroundEffectParams,
                 gains: ControlGains, attitude_rate=500.0, position_rate=100.0,
                 gravity=9.81, model_mismatch=1.0):
        self.trajectory = trajectory
        self.vehicle = vehicle
        self.ge = ge if model_mismatch == 1.0 else ge.scaled(model_mismatch)
        self.gains = gains
        self.gravity = gravity
        self.attitude_period = 1.0 / attitude_rate
        self.ratio = int(round(attitude_rate / position_rate))
        self._tick_count = 0
        self._gyro_lp = LowPass(gains.gyro_cutoff, attitude_rate)
        self._gyro_deriv = FilteredDerivative(gains.gyro_cutoff, attitude_rate)
        self.observer = WrenchObserverRunner(vehicle, attitude_rate, gains.observer_cutoff)
        self.last_flat = None
        self.last_reference = None
        self.last_wrench = None
        self.last_command = None
        self.last_attitude_target = None
        self._f_cmd = None

    def tick(self, t, meas):
        omega_f = self._gyro_lp.update(meas.gyro)
        omega_dot_f = self._gyro_deriv.update(meas.gyro)
        tau_hat = applied_torque(meas.rotor_speeds, self.vehicle)
        thrust_hat = self.vehicle.k_t * float(meas.rotor_speeds @ meas.rotor_speeds)
        self.last_wrench = self.observer.update(
            t, meas.q, meas.specific_force, thrust_hat, meas.gyro, tau_hat
        )

        if self._tick_count % self.ratio == 0:
            flat = self.trajectory(t)
            ref = flat_reference(flat, self.vehicle, self.ge, self.gravity)
            a_des = acceleration_command(
                flat, ref, meas.p, meas.v, self.gains, self.vehicle, self.ge,
                a_ext_est=self.last_wrench.accel if self.last_wrench else None,
            )
            self._f_cmd = a_des + self.gravity * Z_W
            self.last_flat = flat
            self.last_reference = ref
        self._tick_count += 1

        flat, ref = self.last_flat, self.last_reference
        R_hat = quat.rot_matrix(meas.q)
        thrust_des = thrust_command(self._f_cmd, R_hat[:, 2], self.vehicle.m)
        q_des = quat.from_z_axis_yaw(self._f_cmd, flat.yaw)
        self.last_attitude_target = q_des
        xi_err = attitude_error_vector(meas.q, q_des)
        omega_des, omega_dot_des = bodyrate_command(
            xi_err, ref.omega, omega_f, ref.omega_dot, self.gains
        )
        h_des = flat.p[2] + self.vehicle.rotor_plane_offset
        mode = self.gains.torque_comp
        if mode in ("none", "model"):
            torque_des = torque_command_model(
                omega_des, omega_dot_des, h_des, ref.thrust, self.vehicle, self.ge,
                use_equivalent_inertia=(mode == "model"),
            )
        else:
            torque_des = torque_command_indi(
                tau_hat, omega_dot_des, omega_dot_f, h_des, ref.thrust,
                self.vehicle, self.ge,
                use_equivalent_inertia=(mode == "hybrid"),
                age=0.0, period=self.attitude_period,
            )
        command = allocate(thrust_des, torque_des, self.vehicle)
        self.last_command = command
        return command


class FeedforwardController:
    """Reference thrust and torque only; no state feedback at all.

    command_lead shifts the sampled reference forward by half the hold
    interval so the zero-order-held command is centered in time; without it
    the hold acts as a half-period delay that accumulates into drift.
    """

    def __init__(self, trajectory, vehicle: VehicleParams, ge: GroundEffectParams,
                 gravity=9.81, command_lead=0.0):
        self.trajectory = trajectory
        self.vehicle = vehicle
        self.ge = ge
        self.gravity = gravity
        self.command_lead = command_lead
        self.last_flat = None
        self.last_reference = None
        self.last_wrench = None
        self.last_command = None
        self.last_attitude_target = None

    def tick(self, t, meas):
        del meas
        flat = self.trajectory(t + self.command_lead)
        ref = flat_reference(flat, self.vehicle, self.ge, self.gravity)
        command = allocate(ref.thrust, ref.torque, self.vehicle)
        self.last_flat = flat
        self.last_reference = ref
        self.last_command = command
        self.last_attitude_target = ref.attitude
        return command
