"""Two pulses separated by a gap in which the ground light shift is absent.

The gap phase maps directly onto the final Rydberg probability, as in a
Ramsey sequence.

Run: python demos/04_double_pulse.py
"""

import math

import numpy as np

from rydflop.analysis import ramsey_probability
from rydflop.constants import TWO_PI
from rydflop.pulses import PulseParams, double_pulse_curve, double_pulse_sequence, propagate_sequence

om = TWO_PI * 0.7e6
for gap_us in (0.0, 0.5, 1.0, 2.0):
    dg = TWO_PI * 0.53e6
    psi = propagate_sequence(double_pulse_sequence(om, math.pi / om, gap_us * 1e-6, dg))
    print(f"pi/2 - {gap_us:.1f} us gap - pi/2: P_r = {abs(psi[1]) ** 2:.4f} "
          f"(Ramsey {ramsey_probability(dg, gap_us * 1e-6):.4f})")

p = PulseParams.from_rabi(om)
t = np.linspace(0, 4e-6, 81)
pr = double_pulse_curve(p, t, 2e-6, TWO_PI * 0.53e6, om)
print(f"\nTotal pulse time scan with a 2 us gap: max P_r = {pr.max():.3f} at {t[pr.argmax()] * 1e6:.2f} us")
