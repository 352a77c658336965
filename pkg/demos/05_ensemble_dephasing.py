"""Few-atom clouds: van der Waals shifts with near-zero modes dephase the
collective Rabi oscillation as the mean atom number grows.

Run: python demos/05_ensemble_dephasing.py   (about 20 s on one core)
"""

import numpy as np

from rydflop.analysis import bootstrap_visibility
from rydflop.constants import TWO_PI
from rydflop.ensemble import EnsembleConfig, InteractionRule, evolve_ensemble, retention_signal
from rydflop.pulses import DopplerModel, PulseParams
from rydflop.vdw import VdwModel

om = TWO_PI * 0.49e6
t = np.linspace(0, 8e-6, 161)

# Two atoms deep in blockade share one excitation and oscillate at sqrt(2) Omega.
ev = evolve_ensemble(2, om, [0, 0], [[0, 50e6], [50e6, 0]], t)
print(f"Blockaded pair: max P(both Rydberg) = {ev.p_count[2].max():.1e}")

pulse = PulseParams.from_rabi(om)
model = VdwModel.rb43d()
period = TWO_PI / om
for label, rule in (("van der Waals", InteractionRule(model)), ("D = 0 control", InteractionRule(model, "fixed", 0.0))):
    print(f"\n{label}")
    for nbar in (0.3, 1.7, 8.0):
        cfg = EnsembleConfig(nbar, pulse, rule, doppler=DopplerModel(1e-3), trials=1000, seed=3)
        tr = retention_signal(cfg, t, keep_samples=True)
        v, dv = bootstrap_visibility(t, tr.samples, period, window=2.0, n_boot=100)
        print(f"  mean atoms {nbar:4.1f}: visibility {v:.3f} +/- {dv:.3f}  "
              f"(largest basis {tr.meta['max_dim']})")
