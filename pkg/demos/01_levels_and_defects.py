"""Quantum-defect energies, Foerster defects and the Zeeman shift of the
laser-excited pair state.

Run: python demos/01_levels_and_defects.py
"""

from rydflop.levels import (
    ForsterChannel,
    QuantumDefectModel,
    ZeemanStatePair,
    forster_defect,
    level_energy,
    parse_level,
    radial_matrix_element,
    zeeman_resonance_shift,
)

qd = QuantumDefectModel.rubidium()
d52 = parse_level("43d5/2")

print("Rydberg-Ritz energies below the ionization limit")
for name in ("43d5/2", "45p3/2", "41f5/2", "41f7/2"):
    lv = parse_level(name)
    print(f"  {name:<7s} n* = {qd.n_star(lv):.6f}  U/h = {level_energy(lv, qd) / 1e9:9.3f} GHz")

# The pair 43d5/2 + 43d5/2 sits a few MHz above 45p3/2 + 41f.
print("\nFoerster defects of 43d5/2 + 43d5/2 -> 45p3/2 + 41f")
for f in ("41f5/2", "41f7/2"):
    ch = ForsterChannel((d52, d52), (parse_level("45p3/2"), parse_level(f)))
    print(f"  {f}: delta/2pi = {forster_defect(ch, qd) / 1e6:+.2f} MHz")

print("\nSemiclassical radial matrix elements from 43d5/2 (units of a0)")
for f in ("45p3/2", "41f5/2"):
    print(f"  <{f}|r|43d5/2> = {radial_matrix_element(d52, parse_level(f), qd):.0f}")

pair = ZeemanStatePair(2, 2, 0.5, 2, 2.5, 0.5, 1e-3)
print(f"\nTwo-photon resonance shift at 1 mT (f=2, m_f=2 -> m_j=1/2): "
      f"{zeeman_resonance_shift(pair) / 1e6:+.2f} MHz")
