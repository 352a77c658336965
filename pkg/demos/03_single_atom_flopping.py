"""Two-photon Rabi flopping of one atom, with and without thermal motion.

Run: python demos/03_single_atom_flopping.py
"""

import numpy as np

from rydflop.analysis import fit_damped_cosine
from rydflop.constants import TWO_PI
from rydflop.pulses import BeamParams, DopplerModel, PulseParams, doppler_averaged_flop, rabi_flop, rabi_from_beams

# Rabi frequency from beam powers and waists (780 nm: 1.85 uW, 480 nm: 10.7 mW)
beams = rabi_from_beams(BeamParams(1.85e-6, 10, 780), BeamParams(10.7e-3, 10, 480), TWO_PI * -3.4e9)
print(f"Omega_R/2pi from beams = {beams.omega_r / TWO_PI / 1e6:.3f} MHz, "
      f"ground light shift/2pi = {beams.ground_light_shift / TWO_PI / 1e6:+.3f} MHz")

p = PulseParams.from_rabi(TWO_PI * 0.49e6)
t = np.linspace(0, 8e-6, 161)
cold = rabi_flop(p, t)[0]
dop = DopplerModel(1e-3)
warm = doppler_averaged_flop(p, dop, t, n_samples=4000, seed=1)
print(f"Doppler width at 1 mK: sigma/2pi = {dop.sigma_detuning / TWO_PI / 1e3:.0f} kHz")

for label, y in (("T = 0", cold), ("T = 1 mK", warm.value)):
    f = fit_damped_cosine(t, y)
    print(f"{label:>8s}: a = {f.a:.3f}, tau = {f.tau * 1e6:7.2f} us, Omega/2pi = {f.omega_hz / 1e6:.4f} MHz")

print("\n t (us)  P_g(T=0)  P_g(1 mK)")
for k in range(0, len(t), 10):
    print(f"  {t[k] * 1e6:5.2f}   {cold[k]:.3f}     {warm.value[k]:.3f}")
