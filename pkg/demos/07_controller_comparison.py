"""Controller comparison on the low figure-eight with model mismatch.

Mirrors the tracking-experiment table: the same 1 m/s lemniscate at
h = 0.12 m flown with different acceleration/torque compensation modes,
under a 5% ground-effect model mismatch and IMU noise, then tabulated
against the uncompensated baseline.
"""

from nearground import ControlGains, Scenario, SimConfig, compare, lemniscate_period, run
import numpy as np


def scenario(name, accel, torque, seed=7):
    s = Scenario(
        name=name,
        seed=seed,
        duration=lemniscate_period(0.75, 1.0),
        trajectory_kind="lemniscate",
        trajectory_params={"speed": 1.0, "height": 0.12, "half_width": 0.75},
        mismatch=1.05,
        metrics_warmup=1.0,
    )
    s.sim = SimConfig(dt=1e-3, log_decimation=2, noise_accel=0.02, noise_gyro=0.002)
    s.gains = ControlGains(accel_comp=accel, torque_comp=torque)
    return s


rows = [
    ("baseline", "none", "none"),
    ("accel_only", "model", "none"),
    ("accel_indi", "indi", "none"),
    ("full_model", "model", "model"),
    ("full_hybrid", "model", "hybrid"),
]

reports = []
for name, accel, torque in rows:
    _, metrics = run(scenario(name, accel, torque))
    reports.append(metrics)
    print(f"ran {name:12s} attitude RMSE {metrics.attitude_rmse_rad*1e3:.3f} mrad")

print()
print(compare(reports, baseline="baseline").to_text())
