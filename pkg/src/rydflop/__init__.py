"""Rabi flopping of few-atom Rydberg ensembles with van der Waals interactions.

Modules: ``levels`` (quantum defects, Foerster defects, Zeeman shifts),
``angular`` (3j/6j/CG, Wigner d), ``vdw`` (pair eigenmodes), ``pulses``
(single-atom two-photon dynamics), ``ensemble`` (multi-atom Monte Carlo),
``trapstats`` (trap, detection and thermometry statistics), ``analysis``
(fits and visibility) and ``cli``.
"""

__version__ = "0.1.0"
