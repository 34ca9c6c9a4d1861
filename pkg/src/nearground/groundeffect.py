"""Ground-effect disturbance models.

Implements the near-ground thrust amplification F(h), its derivative, the
leveling-torque lever M(h) with a slow quadrature reference used by tests,
altitude-varying rotor drag D(h), and the equivalent inertia that absorbs
the leveling torque into the rotational model.

Altitude h is always the distance from the ground plane to the center of
the rotor plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import KeyValueConfig
from .errors import ConfigError, InputError, ParameterError
from .quaternions import check_rotation
from .vehicle import GRAVITY, VehicleParams

Z_WORLD = np.array([0.0, 0.0, 1.0])

# Default drag table: force-unit coefficients (kg/s), increasing with h.
# The 0.10 m rows are exactly 0.5963 (x) and 0.6179 (y) times the 2.0 m rows.
_DEFAULT_DRAG_TABLE = np.array(
    [
        # h,     d_x,       d_y
        [0.05, 0.170000, 0.148000],
        [0.10, 0.178890, 0.154475],
        [0.20, 0.210000, 0.180000],
        [0.40, 0.255000, 0.215000],
        [0.70, 0.282000, 0.236000],
        [1.20, 0.295000, 0.246000],
        [2.00, 0.300000, 0.250000],
    ]
)


@dataclass
class GroundEffectParams:
    """Parameters of the ground-effect force, torque, and drag models.

    g1, g2 shape the extra-thrust curve g2/(h^2+g1); g3, g4, g5 shape the
    torque lever g5*h/(h^2+g3*h+g4)^2. The drag table rows are (h, d_x, d_y)
    with coefficients in kg/s. With the defaults the torque parameters are
    tied to the thrust curve (g3=0, g4=g1, g5=b^2*g2/4 for b=0.30 m) so the
    lever equals -(b^2/8) * dF/dh identically.
    """

    g1: float = 0.08          # m^2
    g2: float = 0.04          # m^2 (dimensionless F at h=0 is g2/g1)
    g3: float = 0.0           # m
    g4: float = 0.08          # m^2
    g5: float = 9.0e-4        # m^3  (= 0.30^2 * 0.04 / 4)
    drag_table: np.ndarray = None
    tilt_saturation_deg: float = 10.0   # torque stops growing past this tilt; <=0 disables

    def __post_init__(self):
        if self.drag_table is None:
            self.drag_table = _DEFAULT_DRAG_TABLE.copy()
        self.drag_table = np.asarray(self.drag_table, dtype=float)
        self.validate()

    def validate(self):
        if self.g1 <= 0.0 or self.g2 < 0.0:
            raise ParameterError("need g1 > 0 and g2 >= 0")
        if self.g4 <= 0.0 or self.g5 < 0.0:
            raise ParameterError("need g4 > 0 and g5 >= 0")
        # h^2 + g3 h + g4 > 0 for all h >= 0: value at h=0 is g4 > 0 and the
        # vertex -g3/2 only enters h >= 0 for negative g3.
        if self.g3 < 0.0 and self.g4 - self.g3 * self.g3 / 4.0 <= 0.0:
            raise ParameterError("h^2 + g3*h + g4 must stay positive for h >= 0")
        t = self.drag_table
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 2:
            raise ConfigError("drag table needs >= 2 rows of (h, d_x, d_y)")
        if np.any(np.diff(t[:, 0]) <= 0.0):
            raise ConfigError("drag table altitudes must be strictly increasing")
        if np.any(t[:, 1:] < 0.0):
            raise ConfigError("drag coefficients must be non-negative")

    @classmethod
    def from_config(cls, cfg: KeyValueConfig):
        rows = []
        for value, line in cfg.get_all("drag_sample"):
            parts = value.split(",")
            if len(parts) != 3:
                raise ConfigError(
                    f"{cfg.source}:{line}: drag_sample needs 'h, d_x, d_y', got {value!r}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ConfigError(
                    f"{cfg.source}:{line}: drag_sample: cannot parse {value!r}"
                ) from None
        table = np.array(rows) if rows else None
        return cls(
            g1=cfg.get_float("g1", 0.08),
            g2=cfg.get_float("g2", 0.04),
            g3=cfg.get_float("g3", 0.0),
            g4=cfg.get_float("g4", 0.08),
            g5=cfg.get_float("g5", 9.0e-4),
            drag_table=table,
            tilt_saturation_deg=cfg.get_float("tilt_saturation_deg", 10.0),
        )

    @classmethod
    def from_file(cls, path):
        return cls.from_config(KeyValueConfig.from_path(path))

    def scaled(self, factor):
        """Copy with all model magnitudes multiplied (controller mismatch knob)."""
        table = self.drag_table.copy()
        table[:, 1:] *= factor
        return GroundEffectParams(
            g1=self.g1,
            g2=self.g2 * factor,
            g3=self.g3,
            g4=self.g4,
            g5=self.g5 * factor,
            drag_table=table,
            tilt_saturation_deg=self.tilt_saturation_deg,
        )


def _check_h(h):
    if h < 0.0:
        raise InputError(f"altitude must be non-negative, got {h}")
    return float(h)


def thrust_factor(h, params: GroundEffectParams):
    """Fractional extra thrust near ground: g2 / (h^2 + g1)."""
    h = _check_h(h)
    return params.g2 / (h * h + params.g1)


def thrust_factor_prime(h, params: GroundEffectParams):
    """d(thrust_factor)/dh, analytic; non-positive for h >= 0."""
    h = _check_h(h)
    den = h * h + params.g1
    return -2.0 * params.g2 * h / (den * den)


def torque_lever(h, params: GroundEffectParams):
    """Leveling-torque lever arm (m): torque = lever * T * sin(tilt)."""
    h = _check_h(h)
    den = h * h + params.g3 * h + params.g4
    return params.g5 * h / (den * den)


def torque_lever_peak(params: GroundEffectParams, h_max=2.0, n=4001):
    """(h*, lever(h*)) over a dense grid; the lever is unimodal on h >= 0."""
    grid = np.linspace(1e-4, h_max, n)
    den = grid * grid + params.g3 * grid + params.g4
    vals = params.g5 * grid / (den * den)
    i = int(np.argmax(vals))
    return float(grid[i]), float(vals[i])


def _tilt_axis_body(R):
    """R^T (z_B x z_W); magnitude sin(tilt), zero body-z component."""
    z_b = R[:, 2]
    return R.T @ np.cross(z_b, Z_WORLD)


def leveling_torque(R, thrust, h, params: GroundEffectParams):
    """Body-frame restoring torque for a tilted vehicle near ground.

    torque = lever(h) * T * R^T(z_B x z_W); the cross product carries the
    sin(tilt) factor. Past the saturation tilt the magnitude is held at its
    saturation value (the measured plateau), direction unchanged.
    """
    R = check_rotation(R)
    if thrust < 0.0:
        raise InputError("thrust must be non-negative")
    h = _check_h(h)
    axis = _tilt_axis_body(R)
    s = math.sqrt(float(axis @ axis))
    if params.tilt_saturation_deg > 0.0 and s > 1e-12:
        s_max = math.sin(math.radians(params.tilt_saturation_deg))
        if s > s_max:
            axis = axis * (s_max / s)
    return torque_lever(h, params) * thrust * axis


def leveling_torque_quadrature(h, tilt, thrust, params: GroundEffectParams,
                               b=0.30, intervals=4096):
    """Torque magnitude by direct quadrature of the rotor-ring model.

    Distributes the extra thrust F(H)·T/(2π) on the circle of diameter b,
    with ring height H(θ) = h - (b/2) sin(tilt) cos(θ), and integrates the
    moment arm (b/2) cosθ with composite Simpson. No linearization in h, so
    this serves as the independent reference for the closed-form lever.
    """
    h = _check_h(h)
    if intervals % 2:
        raise InputError("Simpson quadrature needs an even interval count")
    radius = b / 2.0
    if h - radius * abs(math.sin(tilt)) <= 0.0:
        raise InputError("lowest rotor point at or below ground")
    theta = np.linspace(0.0, 2.0 * np.pi, intervals + 1)
    ring_h = h - radius * math.sin(tilt) * np.cos(theta)
    density = params.g2 / (ring_h * ring_h + params.g1) * thrust / (2.0 * np.pi)
    integrand = density * radius * np.cos(theta)
    weights = np.ones(intervals + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    step = 2.0 * np.pi / intervals
    return float(step / 3.0 * (weights @ integrand))


def added_thrust_force(R, thrust, h, params: GroundEffectParams):
    """World-frame extra force: F(h) * T * z_B. Independent of tilt at fixed h."""
    R = check_rotation(R)
    if thrust < 0.0:
        raise InputError("thrust must be non-negative")
    return thrust_factor(h, params) * thrust * R[:, 2]


def drag_coefficients(h, params: GroundEffectParams):
    """(d_x, d_y) in kg/s at altitude h, linear interpolation, end-clamped."""
    h = _check_h(h)
    t = params.drag_table
    dx = float(np.interp(h, t[:, 0], t[:, 1]))
    dy = float(np.interp(h, t[:, 0], t[:, 2]))
    return dx, dy


def drag_matrix(h, params: GroundEffectParams):
    """diag(d_x, d_y, 0): the body-z channel carries no rotor drag."""
    dx, dy = drag_coefficients(h, params)
    return np.diag([dx, dy, 0.0])


def drag_force(R, v, h, params: GroundEffectParams):
    """World-frame rotor drag -R D(h) R^T v (N)."""
    R = check_rotation(R)
    v = np.asarray(v, dtype=float)
    dx, dy = drag_coefficients(h, params)
    v_body = R.T @ v
    return -R @ (np.array([dx, dy, 0.0]) * v_body)


def equivalent_inertia(h, params: GroundEffectParams, vehicle: VehicleParams,
                       thrust=None, gravity=GRAVITY):
    """Inertia absorbing the leveling torque as a virtual hung payload.

    J' = J + diag(s^2, s^2, 0)/m with s = lever(h)*T/g. When no thrust is
    given the hover value T = m g / (1 + F(h)) is used.
    """
    h = _check_h(h)
    if thrust is None:
        thrust = vehicle.m * gravity / (1.0 + thrust_factor(h, params))
    lever_t = torque_lever(h, params) * thrust
    added = lever_t * lever_t / (vehicle.m * gravity * gravity)
    Jp = vehicle.inertia.copy()
    Jp[0, 0] += added
    Jp[1, 1] += added
    return Jp
