"""Reference generation from flat outputs under ground effect.

Position and yaw trajectories (with derivatives through snap and yaw
acceleration) map to thrust, attitude, body rates, body-rate derivatives,
torque, and rotor speeds for the near-ground model: thrust amplified by
(1 + F(h)), rotor drag -R D(h) R^T v, rotational dynamics with the
equivalent inertia J'(h).

The body-rate algebra differentiates the translational force balance with
the drag coefficients frozen at the current altitude (their time
derivative is neglected; they are still re-evaluated every call). The
thrust-axis scalar c = z_B . (a + g z_W) carries all altitude coupling of
the amplified thrust, so its derivative needs no model approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quaternions as quat
from .errors import ParameterError, ReferenceGenerationError
from .groundeffect import (
    GroundEffectParams,
    drag_coefficients,
    equivalent_inertia,
    thrust_factor,
)
from .vehicle import GRAVITY, VehicleParams, mixing_matrix_inverse

Z_W = np.array([0.0, 0.0, 1.0])


@dataclass
class FlatOutput:
    """Flat outputs at one instant: position chain and yaw chain."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    s: np.ndarray
    yaw: float = 0.0
    yaw_rate: float = 0.0
    yaw_accel: float = 0.0

    def __post_init__(self):
        for name in ("p", "v", "a", "j", "s"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))


@dataclass
class FlatReference:
    """Derived reference at one instant."""

    thrust: float
    attitude: np.ndarray      # unit quaternion, world-from-body
    omega: np.ndarray         # rad/s, body
    omega_dot: np.ndarray     # rad/s^2, body
    torque: np.ndarray        # N m, body
    rotor_speeds: np.ndarray  # rpm
    feasible: bool
    iterations: int


# -- trajectory generators ---------------------------------------------------

def lemniscate(t, half_width=0.75, height=1.0, peak_speed=1.0):
    """Figure-eight at constant altitude: x = A sin(wt), y = A/2 sin(2wt).

    The angular rate is set so the largest speed over a period equals
    peak_speed (reached at the crossing point).
    """
    A = float(half_width)
    w = peak_speed / (A * math.sqrt(2.0))
    th = w * t
    s1, c1 = math.sin(th), math.cos(th)
    s2, c2 = math.sin(2 * th), math.cos(2 * th)
    p = np.array([A * s1, 0.5 * A * s2, height])
    v = np.array([A * w * c1, A * w * c2, 0.0])
    a = np.array([-A * w * w * s1, -2 * A * w * w * s2, 0.0])
    j = np.array([-A * w**3 * c1, -4 * A * w**3 * c2, 0.0])
    s = np.array([A * w**4 * s1, 8 * A * w**4 * s2, 0.0])
    return FlatOutput(p, v, a, j, s)


def lemniscate_period(half_width=0.75, peak_speed=1.0):
    return 2.0 * math.pi * half_width * math.sqrt(2.0) / peak_speed


def _smooth_step_c4(x):
    """9th-order smoothstep and its four derivatives (zero at both ends)."""
    s = x**5 * (126 - 420 * x + 540 * x**2 - 315 * x**3 + 70 * x**4)
    d1 = 630.0 * x**4 * (1 - x) ** 4
    d2 = 2520.0 * x**3 * (1 - x) ** 3 * (1 - 2 * x)
    d3 = 2520.0 * x**2 * (1 - x) ** 2 * (14 * x**2 - 14 * x + 3)
    d4 = 15120.0 * (x - x**2) * (1 - 2 * x) * (7 * x**2 - 7 * x + 1)
    return s, d1, d2, d3, d4


def hover_descent(t, h_start, h_end, duration, hold=0.0):
    """Smooth (C^4) vertical profile from h_start down to h_end, no lateral motion."""
    if h_end <= 0.0 or h_start <= h_end:
        raise ParameterError("need h_start > h_end > 0")
    if duration <= 0.0:
        raise ParameterError("duration must be positive")
    tau = (t - hold) / duration
    if tau <= 0.0:
        return FlatOutput([0, 0, h_start], np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))
    if tau >= 1.0:
        return FlatOutput([0, 0, h_end], np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))
    s, d1, d2, d3, d4 = _smooth_step_c4(tau)
    dz = h_end - h_start
    p = np.array([0.0, 0.0, h_start + dz * s])
    return FlatOutput(
        p,
        [0.0, 0.0, dz * d1 / duration],
        [0.0, 0.0, dz * d2 / duration**2],
        [0.0, 0.0, dz * d3 / duration**3],
        [0.0, 0.0, dz * d4 / duration**4],
    )


def hover_point(t, position):
    del t
    return FlatOutput(position, np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3))


def make_trajectory(kind, **kw):
    """Trajectory factory returning a callable t -> FlatOutput."""
    if kind == "lemniscate":
        return lambda t: lemniscate(
            t,
            half_width=kw.get("half_width", 0.75),
            height=kw.get("height", 1.0),
            peak_speed=kw.get("speed", 1.0),
        )
    if kind == "hover_descent":
        return lambda t: hover_descent(
            t,
            kw.get("h_start", 1.0),
            kw.get("h_end", 0.1),
            kw.get("duration", 20.0),
            hold=kw.get("hold", 0.0),
        )
    if kind == "hover":
        pos = np.array([kw.get("x", 0.0), kw.get("y", 0.0), kw.get("height", 1.0)])
        return lambda t: hover_point(t, pos)
    raise ParameterError(f"unknown trajectory kind {kind!r}")


# -- thrust and attitude -----------------------------------------------------

def reference_thrust_attitude(flat: FlatOutput, vehicle: VehicleParams,
                              ge: GroundEffectParams, gravity=GRAVITY,
                              tol=1e-10, max_iter=20):
    """(T_ref, attitude) solving the drag-coupled thrust-axis fixed point.

    Iterates z_B ~ a + g z_W + drag-restoring terms until the axis settles,
    completes the attitude from yaw, and evaluates the thrust with the
    ground amplification removed from the required specific force.
    """
    h = flat.p[2] + vehicle.rotor_plane_offset
    if h < 0.0:
        raise ReferenceGenerationError(f"reference altitude below ground: h={h:.4f}")
    dx, dy = drag_coefficients(h, ge)
    dax, day = dx / vehicle.m, dy / vehicle.m
    f0 = flat.a + gravity * Z_W
    n0 = np.linalg.norm(f0)
    if n0 < 1e-9:
        raise ReferenceGenerationError("free-fall reference: thrust axis undefined")
    z_b = f0 / n0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        q = quat.from_z_axis_yaw(z_b, flat.yaw)
        R = quat.rot_matrix(q)
        x_b, y_b = R[:, 0], R[:, 1]
        f = f0 + dax * (x_b @ flat.v) * x_b + day * (y_b @ flat.v) * y_b
        z_new = f / np.linalg.norm(f)
        delta = np.linalg.norm(z_new - z_b)
        z_b = z_new
        if delta < tol:
            break
    else:
        raise ReferenceGenerationError(
            f"thrust-axis fixed point did not converge in {max_iter} iterations"
        )
    q = quat.from_z_axis_yaw(z_b, flat.yaw)
    fg = thrust_factor(h, ge)
    thrust = vehicle.m * float(z_b @ f0) / (1.0 + fg)
    if thrust <= 0.0:
        raise ReferenceGenerationError("reference thrust non-positive")
    return thrust, q, iterations


def reference_rates(flat: FlatOutput, vehicle: VehicleParams, ge: GroundEffectParams,
                    gravity=GRAVITY, attitude=None):
    """(omega, omega_dot) from jerk/snap and the yaw chain.

    Differentiates the translational balance twice with the drag matrix
    frozen; the altitude dependence of the amplified thrust rides along in
    the thrust-axis scalar and needs no extra terms.
    """
    if attitude is None:
        _, attitude, _ = reference_thrust_attitude(flat, vehicle, ge, gravity)
    R = quat.rot_matrix(attitude)
    x_b, y_b, z_b = R[:, 0], R[:, 1], R[:, 2]
    h = flat.p[2] + vehicle.rotor_plane_offset
    dx, dy = drag_coefficients(h, ge)
    d1, d2 = dx / vehicle.m, dy / vehicle.m

    gz = flat.a + gravity * Z_W
    c = float(z_b @ gz)
    v_b = R.T @ flat.v
    a_b = R.T @ flat.a
    j_b = R.T @ flat.j
    s_b = R.T @ flat.s

    yaw, dyaw, ddyaw = flat.yaw, flat.yaw_rate, flat.yaw_accel
    x_c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    y_c = np.array([-math.sin(yaw), math.cos(yaw), 0.0])

    # rate solve: rows are the body-x jerk balance and the yaw kinematics
    a11 = c + d1 * v_b[2]
    a12 = -(d1 - d2) * v_b[1]
    a21 = -float(y_c @ z_b)
    a22 = float(y_c @ y_b)
    r1 = j_b[0] + d1 * a_b[0]
    r2 = dyaw * float(x_c @ x_b)
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-12:
        raise ReferenceGenerationError("rate solve singular (thrust axis degenerate)")
    w2 = (r1 * a22 - a12 * r2) / det
    w3 = (a11 * r2 - r1 * a21) / det
    den1 = c + d2 * v_b[2]
    w1 = -(j_b[1] + d2 * a_b[1] + (d1 - d2) * v_b[0] * w3) / den1
    omega = np.array([w1, w2, w3])

    # derivative solve: same matrix, differentiated data on the right side
    vdot_b = a_b - np.cross(omega, v_b)
    adot_b = j_b - np.cross(omega, a_b)
    jdot_b = s_b - np.cross(omega, j_b)
    cdot = w2 * float(x_b @ gz) - w1 * float(y_b @ gz) + float(z_b @ flat.j)

    da11 = cdot + d1 * vdot_b[2]
    da12 = -(d1 - d2) * vdot_b[1]
    da21 = dyaw * float(x_c @ z_b) - w2 * float(y_c @ x_b) + w1 * float(y_c @ y_b)
    da22 = -dyaw * float(x_c @ y_b) - w3 * float(y_c @ x_b) + w1 * float(y_c @ z_b)
    dr1 = jdot_b[0] + d1 * adot_b[0]
    dr2 = (
        ddyaw * float(x_c @ x_b)
        + dyaw * dyaw * float(y_c @ x_b)
        + dyaw * w3 * float(x_c @ y_b)
        - dyaw * w2 * float(x_c @ z_b)
    )
    b1 = dr1 - da11 * w2 - da12 * w3
    b2 = dr2 - da21 * w2 - da22 * w3
    wd2 = (b1 * a22 - a12 * b2) / det
    wd3 = (a11 * b2 - b1 * a21) / det
    wd1 = -(
        jdot_b[1]
        + d2 * adot_b[1]
        + w1 * (cdot + d2 * vdot_b[2])
        + (d1 - d2) * (vdot_b[0] * w3 + v_b[0] * wd3)
    ) / den1
    return omega, np.array([wd1, wd2, wd3])


def reference_torque(omega, omega_dot, h, thrust, vehicle: VehicleParams,
                     ge: GroundEffectParams, gravity=GRAVITY):
    """Body torque J'(h) w_dot + w x J'(h) w with the leveling-equivalent inertia."""
    Jp = equivalent_inertia(h, ge, vehicle, thrust=thrust, gravity=gravity)
    omega = np.asarray(omega, dtype=float)
    return Jp @ np.asarray(omega_dot, dtype=float) + np.cross(omega, Jp @ omega)


def flat_reference(flat: FlatOutput, vehicle: VehicleParams, ge: GroundEffectParams,
                   gravity=GRAVITY):
    """Full reference tuple for one flat-output sample.

    Rotor speeds outside [0, n_max] mark the reference infeasible instead of
    being clamped, so callers can distinguish planning failures from
    tracking error.
    """
    thrust, attitude, iterations = reference_thrust_attitude(flat, vehicle, ge, gravity)
    omega, omega_dot = reference_rates(flat, vehicle, ge, gravity, attitude=attitude)
    h = flat.p[2] + vehicle.rotor_plane_offset
    torque = reference_torque(omega, omega_dot, h, thrust, vehicle, ge, gravity)
    n_sq = mixing_matrix_inverse(vehicle) @ np.concatenate(([thrust], torque))
    feasible = bool(np.all(n_sq >= -1e-9) and np.all(n_sq <= vehicle.n_max**2 + 1e-9))
    n_ref = np.sqrt(np.clip(n_sq, 0.0, None))
    return FlatReference(thrust, attitude, omega, omega_dot, torque, n_ref,
                         feasible, iterations)
