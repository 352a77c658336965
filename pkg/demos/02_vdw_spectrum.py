"""Zeeman-degenerate van der Waals interaction of two 43d5/2 atoms.

The 36 pair states split into eigenmodes labelled by M, the projection of
the total angular momentum on the interatomic axis. Lasers polarized along
z excite a superposition of these modes; the weights |kappa|^2 decide how
often an atom pair sees a nearly vanishing interaction.

Run: python demos/02_vdw_spectrum.py
"""

import math

from rydflop.vdw import PairGeometry, VdwModel, excited_state_overlaps, pair_interaction_strength

model = VdwModel.rb43d()
print(f"C6 = {model.c6_hz_um6 / 1e9:.0f} GHz um^6 ({model.c6_source}), weighting = {model.weighting}")

# along z only M = 1 is excited, so the near-zero M = 0 mode drops out
for theta_deg in (90.0, 0.0):
    modes = excited_state_overlaps(model, math.radians(theta_deg))
    print(f"\nPair axis at {theta_deg:.0f} deg from the quantization axis")
    print("   M      D      |kappa|^2")
    for m in sorted(modes, key=lambda m: -m.weight)[:8]:
        print(f"  {int(m.M):+d}  {m.D:8.5f}  {m.weight:8.4f}")
    zero = sum(m.weight for m in modes if abs(m.D) < 0.01)
    print(f"  weight in near-zero modes (|D| < 0.01): {zero:.3f}")

g = PairGeometry(7.8)
print("\nShift at R = 7.8 um with C6 = 450 GHz um^6:")
for d in (0.0024, 0.81):
    print(f"  D = {d:<7g} -> {pair_interaction_strength(450e9, d, g) / 1e3:10.1f} kHz")
