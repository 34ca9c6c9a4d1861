"""Ground-effect model curves for the desk-scale vehicle.

Prints the landmark values of the extra-thrust curve, its slope, the
leveling-torque lever, and the altitude-varying drag coefficients, and
writes plot-ready CSV series into demo_out/.
"""

import os

import numpy as np

from nearground import (
    GroundEffectParams,
    VehicleParams,
    drag_coefficients,
    thrust_factor,
    thrust_factor_prime,
    torque_lever,
    torque_lever_peak,
    write_series_csv,
)

out = "demo_out"
os.makedirs(out, exist_ok=True)

ge = GroundEffectParams()
veh = VehicleParams()
h = np.linspace(0.02, 2.0, 400)

factor = np.array([thrust_factor(x, ge) for x in h])
slope = np.array([thrust_factor_prime(x, ge) for x in h])
lever = np.array([torque_lever(x, ge) for x in h])
dx = np.array([drag_coefficients(x, ge)[0] for x in h])
dy = np.array([drag_coefficients(x, ge)[1] for x in h])

print("extra thrust fraction F(h):")
for probe in (0.07, 0.12, 0.18, 0.30, 1.0, 2.0):
    print(f"  F({probe:.2f} m) = {thrust_factor(probe, ge):.4f}")

h_star, peak = torque_lever_peak(ge)
print(f"\nleveling-torque lever peaks at h = {h_star:.3f} m "
      f"(lever {peak*1000:.2f} mm of thrust arm)")
hover_thrust = veh.m * 9.81 / (1.0 + thrust_factor(h_star, ge))
print(f"at hover thrust there, a 5 deg tilt draws "
      f"{peak*hover_thrust*np.sin(np.radians(5.0))*1000:.2f} mN*m of restoring torque")

dx_low, dy_low = drag_coefficients(0.1, ge)
dx_high, dy_high = drag_coefficients(2.0, ge)
print(f"\ndrag coefficients: d_x(0.1)/d_x(2.0) = {dx_low/dx_high:.4f}, "
      f"d_y(0.1)/d_y(2.0) = {dy_low/dy_high:.4f}")

write_series_csv(os.path.join(out, "thrust_factor_vs_h.csv"),
                 ["h", "thrust_factor", "slope"], [h, factor, slope])
write_series_csv(os.path.join(out, "torque_lever_vs_h.csv"), ["h", "lever"], [h, lever])
write_series_csv(os.path.join(out, "drag_vs_h.csv"), ["h", "d_x", "d_y"], [h, dx, dy])
print(f"\nwrote thrust_factor_vs_h.csv, torque_lever_vs_h.csv, drag_vs_h.csv to {out}/")
