"""Disturbance observation and parameter identification.

Low-pass filtering, the external-wrench observer, Spearman rank
correlation with average-rank tie handling, ground-effect measurement
formulas, and damped Gauss-Newton fits for the thrust, torque, and drag
curves. Fits run offline over immutable sample arrays.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError, InputError
from .quaternions import rot_matrix
from .vehicle import VehicleParams

Z_W = np.array([0.0, 0.0, 1.0])


# -- filtering ----------------------------------------------------------------

class LowPass:
    """First-order IIR low-pass with exact unity DC gain."""

    def __init__(self, cutoff_hz, sample_rate_hz, initial=None):
        if cutoff_hz >= 0.5 * sample_rate_hz:
            raise ConfigError(
                f"cutoff {cutoff_hz} Hz must be below Nyquist of {sample_rate_hz} Hz"
            )
        if cutoff_hz <= 0.0:
            raise ConfigError("cutoff must be positive")
        dt = 1.0 / sample_rate_hz
        tau = 1.0 / (2.0 * math.pi * cutoff_hz)
        self.alpha = dt / (dt + tau)
        self.state = None if initial is None else np.asarray(initial, dtype=float)

    def update(self, x):
        x = np.asarray(x, dtype=float)
        if self.state is None:
            self.state = x.copy()
        else:
            self.state = self.state + self.alpha * (x - self.state)
        return self.state


class FilteredDerivative:
    """Low-pass the signal, then backward-difference it."""

    def __init__(self, cutoff_hz, sample_rate_hz):
        self.lp = LowPass(cutoff_hz, sample_rate_hz)
        self.dt = 1.0 / sample_rate_hz
        self._prev = None

    def update(self, x):
        y = self.lp.update(x)
        if self._prev is None:
            self._prev = y.copy()
            return np.zeros_like(y)
        d = (y - self._prev) / self.dt
        self._prev = y.copy()
        return d


# -- wrench observer ----------------------------------------------------------

@dataclass
class WrenchEstimate:
    accel: np.ndarray     # external specific force, world frame, m/s^2
    torque: np.ndarray    # external torque, body frame, N m
    t: float = 0.0


def wrench_observer(q_hat, specific_force_f, thrust_f, omega_f, omega_dot_f,
                    tau_b, vehicle: VehicleParams):
    """External wrench from filtered measurements.

    accel: R f_imu - z_B T/m, the residual world acceleration not explained
    by the rotors. torque: J w_dot + w x J w - tau_B.
    """
    R = rot_matrix(q_hat)
    a_ext = R @ np.asarray(specific_force_f, float) - R[:, 2] * (thrust_f / vehicle.m)
    J = vehicle.inertia
    omega_f = np.asarray(omega_f, float)
    tau_ext = J @ np.asarray(omega_dot_f, float) + np.cross(omega_f, J @ omega_f) - tau_b
    return WrenchEstimate(a_ext, tau_ext)


class WrenchObserverRunner:
    """Stateful observer: owns the input filters, guards time alignment."""

    def __init__(self, vehicle: VehicleParams, sample_rate_hz, cutoff_hz=20.0):
        self.vehicle = vehicle
        self.period = 1.0 / sample_rate_hz
        self.f_accel = LowPass(cutoff_hz, sample_rate_hz)
        self.f_thrust = LowPass(cutoff_hz, sample_rate_hz)
        self.f_omega = LowPass(cutoff_hz, sample_rate_hz)
        self.d_omega = FilteredDerivative(cutoff_hz, sample_rate_hz)
        self.last = None
        self._t_prev = None

    def update(self, t, q_hat, specific_force, thrust, omega, tau_b, t_torque=None):
        """Feed one synchronized sample; returns the current WrenchEstimate.

        A torque sample older than one period is a misalignment: the sample
        is dropped with a warning and the previous estimate stands.
        """
        if t_torque is not None and abs(t - t_torque) > self.period * (1.0 + 1e-9):
            warnings.warn(
                f"observer inputs misaligned ({abs(t - t_torque):.4f}s apart); sample dropped",
                stacklevel=2,
            )
            return self.last
        self._t_prev = t
        f_f = self.f_accel.update(specific_force)
        T_f = float(self.f_thrust.update([thrust])[0])
        w_f = self.f_omega.update(omega)
        wd_f = self.d_omega.update(omega)
        est = wrench_observer(q_hat, f_f, T_f, w_f, wd_f, tau_b, self.vehicle)
        est.t = t
        self.last = est
        return est


# -- rank correlation ---------------------------------------------------------

def average_ranks(values):
    """1-based ranks, ties get the mean of the positions they straddle."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Rank correlation in [-1, 1]; exactly +-1 for strictly monotone pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("sequences must be 1-d and of equal length")
    if len(x) < 3:
        raise InputError("need at least 3 samples")
    a = average_ranks(x)
    b = average_ranks(y)
    a -= a.mean()
    b -= b.mean()
    den_sq = float(a @ a) * float(b @ b)
    if den_sq == 0.0:
        raise InputError("constant sequence: rank correlation undefined")
    return float(a @ b) / math.sqrt(den_sq)


# -- ground-effect measurements ------------------------------------------------

def thrust_factor_from_platform(f_z, thrust, min_thrust=1e-6):
    """Extra-thrust fraction from a force-platform reading: f_z/T - 1."""
    if thrust <= min_thrust:
        raise InputError("thrust too small to normalize a platform sample")
    return float(f_z) / float(thrust) - 1.0


def thrust_factor_from_flight(a_ext, thrust, mass, min_thrust=1e-6):
    """Extra-thrust fraction from the observer's external acceleration."""
    if thrust <= min_thrust:
        raise InputError("thrust too small to normalize a flight sample")
    a_ext = np.asarray(a_ext, dtype=float)
    return mass * float(Z_W @ a_ext) / float(thrust)


def normalize_coefficient_curve(h, k, k_inf=None):
    """k(h)/k(inf) - 1, with k(inf) the mean over the top altitude decile."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if k_inf is None:
        order = np.argsort(h)
        n_top = max(1, len(h) // 10)
        k_inf = float(np.mean(k[order[-n_top:]]))
    if k_inf == 0.0:
        raise InputError("asymptotic coefficient is zero; cannot normalize")
    return k / k_inf - 1.0


# -- damped Gauss-Newton -------------------------------------------------------

@dataclass
class FitReport:
    names: list
    params: np.ndarray
    residual_rms: float
    n_samples: int
    ci95: np.ndarray
    iterations: int

    def to_dict(self):
        return {
            "params": {n: float(p) for n, p in zip(self.names, self.params)},
            "ci95": {n: float(c) for n, c in zip(self.names, self.ci95)},
            "residual_rms": float(self.residual_rms),
            "n_samples": int(self.n_samples),
            "iterations": int(self.iterations),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"fit over {self.n_samples} samples, {self.iterations} iterations"]
        for n, p, c in zip(self.names, self.params, self.ci95):
            lines.append(f"  {n} = {p:.8g} (+- {c:.3g})")
        lines.append(f"  residual RMS = {self.residual_rms:.6g}")
        return "\n".join(lines)


def _numeric_jacobian(f, p):
    r0 = f(p)
    J = np.empty((len(r0), len(p)))
    for i in range(len(p)):
        step = 1e-7 * max(abs(p[i]), 1e-2)
        pp = p.copy()
        pp[i] += step
        pm = p.copy()
        pm[i] -= step
        J[:, i] = (f(pp) - f(pm)) / (2.0 * step)
    return J


def levenberg_fit(residual, p0, names, max_iter=200, rel_step_tol=1e-10,
                  cond_limit=1e12):
    """Gauss-Newton with Levenberg damping on a residual function.

    Converges when the relative parameter step drops below rel_step_tol;
    raises FitError on non-convergence or rank-deficient normal equations.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = residual(p)
    cost = float(r @ r)
    lam = 1e-3
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        J = _numeric_jacobian(residual, p)
        JtJ = J.T @ J
        if np.linalg.cond(JtJ) > cond_limit:
            raise FitError(
                "normal equations rank-deficient: parameters unidentifiable "
                f"(residual RMS {math.sqrt(cost / len(r)):.4g})"
            )
        g = J.T @ r
        scale = np.diag(np.maximum(np.diag(JtJ), 1e-12))
        accepted = False
        for _ in range(60):
            try:
                delta = np.linalg.solve(JtJ + lam * scale, -g)
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            r_new = residual(p + delta)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                p = p + delta
                r, cost = r_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 4.0
            if lam > 1e14:
                break
        if not accepted:
            raise FitError(
                f"damping exhausted after {iterations} iterations "
                f"(residual RMS {math.sqrt(cost / len(r)):.4g})"
            )
        if np.linalg.norm(delta) < rel_step_tol * (np.linalg.norm(p) + 1e-30):
            converged = True
            break
    if not converged:
        raise FitError(
            f"no convergence in {max_iter} iterations "
            f"(residual RMS {math.sqrt(cost / len(r)):.4g})"
        )
    # linearized covariance for the confidence intervals
    J = _numeric_jacobian(residual, p)
    dof = max(len(r) - len(p), 1)
    sigma_sq = cost / dof
    JtJ = J.T @ J
    if np.linalg.cond(JtJ) > cond_limit:
        ci = np.full(len(p), np.inf)
    else:
        ci = 1.96 * np.sqrt(np.maximum(np.diag(sigma_sq * np.linalg.inv(JtJ)), 0.0))
    rms = math.sqrt(cost / len(r))
    return FitReport(list(names), p, rms, len(r), ci, iterations)


def fit_thrust_factor(h, f_measured):
    """Identify (g1, g2) of the extra-thrust curve g2/(h^2+g1)."""
    h = np.asarray(h, dtype=float)
    f_measured = np.asarray(f_measured, dtype=float)
    if len(h) < 10:
        raise FitError("need at least 10 samples")
    span = h.max() / max(h.min(), 1e-12)
    if span < 3.0:
        raise FitError(
            f"altitude span factor {span:.2f} < 3: (g1, g2) unidentifiable"
        )

    def residual(p):
        g1, g2 = p
        return g2 / (h * h + g1) - f_measured

    g1_0 = float(np.median(h)) ** 2
    g2_0 = max(float(f_measured.max()), 1e-3) * (float(h.min()) ** 2 + g1_0)
    return levenberg_fit(residual, [g1_0, g2_0], ["g1", "g2"])


def fit_torque_lever(h, tilt, thrust, torque_mag, max_tilt_deg=10.0):
    """Identify (g3, g4, g5) of lever(h) from |torque| = lever * T * sin(tilt)."""
    h = np.asarray(h, dtype=float)
    tilt = np.asarray(tilt, dtype=float)
    thrust = np.asarray(thrust, dtype=float)
    torque_mag = np.asarray(torque_mag, dtype=float)
    if np.any(np.degrees(tilt) > max_tilt_deg + 1e-9):
        raise FitError(f"samples beyond the {max_tilt_deg} deg linear regime")
    lever_obs = torque_mag / (thrust * np.sin(tilt))

    def residual(p):
        g3, g4, g5 = p
        den = h * h + g3 * h + g4
        return g5 * h / (den * den) * thrust * np.sin(tilt) - torque_mag

    hp = float(h[np.argmax(lever_obs)])
    g4_0 = 3.0 * hp * hp
    g5_0 = float(lever_obs.max()) * (hp * hp + g4_0) ** 2 / hp
    return levenberg_fit(residual, [0.0, g4_0, g5_0], ["g3", "g4", "g5"])


@dataclass
class DragFit:
    d_x: float
    d_y: float
    stderr_x: float
    stderr_y: float
    n_samples: int


def _slope_with_stderr(x, y):
    n = len(x)
    A = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    sxx = float(np.sum((x - x.mean()) ** 2))
    sigma_sq = float(resid @ resid) / max(n - 2, 1)
    return float(coef[0]), math.sqrt(sigma_sq / sxx)


def fit_drag_coefficients(v_body, a_ext_body, mass, min_speed=0.3):
    """Drag coefficients (kg/s) from body-frame velocity and external accel.

    Regresses each in-plane acceleration component on the matching velocity
    component; the drag coefficient is mass times the slope magnitude.
    """
    v_body = np.asarray(v_body, dtype=float)
    a_ext_body = np.asarray(a_ext_body, dtype=float)
    if np.max(np.abs(v_body[:, 0])) < min_speed or np.max(np.abs(v_body[:, 1])) < min_speed:
        raise FitError(f"insufficient velocity excitation (< {min_speed} m/s)")
    sx, ex = _slope_with_stderr(v_body[:, 0], a_ext_body[:, 0])
    sy, ey = _slope_with_stderr(v_body[:, 1], a_ext_body[:, 1])
    return DragFit(abs(sx) * mass, abs(sy) * mass, ex * mass, ey * mass, len(v_body))


def fit_drag_from_log(log, vehicle: VehicleParams, min_speed=0.3):
    """Drag fit over a trajectory-log segment flown at roughly fixed altitude."""
    q = log.cols(["qw", "qx", "qy", "qz"])
    v = log.cols(["vx", "vy", "vz"])
    a_ext = log.cols(["obs_aext_x", "obs_aext_y", "obs_aext_z"])
    v_body = np.empty((len(log), 3))
    a_body = np.empty((len(log), 3))
    for i in range(len(log)):
        R = rot_matrix(q[i])
        v_body[i] = R.T @ v[i]
        a_body[i] = R.T @ a_ext[i]
    return fit_drag_coefficients(v_body[:, :2], a_body[:, :2], vehicle.m, min_speed)
