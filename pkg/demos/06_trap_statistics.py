"""Trap frequencies, atom counting, preselection and thermometry.

Run: python demos/06_trap_statistics.py
"""

import numpy as np

from rydflop.trapstats import (
    DetectionModel,
    LossModel,
    TrapModel,
    drop_recapture,
    estimate_temperature,
    misclassification_probability,
    preselection_experiment,
)

trap = TrapModel()
print(f"FORT: radial {trap.radial_frequency_hz / 1e3:.1f} kHz, axial {trap.axial_frequency_hz / 1e3:.2f} kHz, "
      f"Rayleigh range {trap.rayleigh_um:.1f} um")

det = DetectionModel()
print(f"\nOne atom gives {det.single_atom_mean:.0f} photoelectrons per probe; "
      f"P(misclassified) = {misclassification_probability(1, det):.1e}")

res = preselection_experiment(1.0, det, LossModel(), trials=20000, seed=1)
print(f"P(second = 1 | first = 1) = {res.retention:.3f}")
heavy = preselection_experiment(3.0, det, LossModel(), trials=20000, seed=1)
print(f"P(second >= 2 | first >= 2) at mean loading 3 = {heavy.conditional_at_least(2):.3f}")

t_drop = np.array([5.0, 10, 15, 20, 30, 40, 50]) * 1e-6
# at 1 mK atoms move ~0.3 m/s against a 2.7 um waist: microsecond drop times
print("\nDrop and recapture, t_drop =", " ".join(f"{x * 1e6:.0f}" for x in t_drop), "us")
for T in (0.5e-3, 1e-3):
    print(f"  T = {T * 1e3:.1f} mK:", " ".join(f"{r:.3f}" for r in drop_recapture(trap, T, t_drop, 20000, seed=2)))

data = drop_recapture(trap, 1e-3, t_drop, trials=10000, seed=5)
est = estimate_temperature(t_drop, data, trap, n_sim=20000, data_trials=10000, n_boot=30)
print(f"Fitted temperature: {est.temperature_k * 1e3:.2f} mK "
      f"(95% interval {est.ci_low_k * 1e3:.2f}-{est.ci_high_k * 1e3:.2f} mK)")
