"""Rydberg level structure of rubidium.

Energies follow the Rydberg-Ritz form truncated after the second term,
``U = -Ry / (n - delta0 - delta2/(n - delta0)**2)**2``, with U in Hz measured
from the ionization limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .angular import twice
from .constants import load_constants, reduced_rydberg_hz

L_LETTERS = "spdfghiklmnoqrtuvwxyz"

__all__ = [
    "RydbergLevel",
    "QuantumDefectModel",
    "ForsterChannel",
    "ZeemanStatePair",
    "SelectionRuleError",
    "MissingSeriesError",
    "level_energy",
    "forster_defect",
    "zeeman_resonance_shift",
    "lande_gj",
    "dipole_scale_estimate",
    "radial_matrix_element",
    "parse_level",
]


class SelectionRuleError(ValueError):
    pass


class MissingSeriesError(KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass(frozen=True)
class RydbergLevel:
    n: int
    l: int
    j: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if int(self.l) != self.l or not 0 <= self.l < self.n:
            raise ValueError(f"need 0 <= l < n, got n={self.n}, l={self.l}")
        tj = twice(self.j)
        allowed = {1} if self.l == 0 else {2 * self.l - 1, 2 * self.l + 1}
        if tj not in allowed:
            raise ValueError(f"j={self.j} incompatible with l={self.l}")
        object.__setattr__(self, "j", tj / 2)

    @property
    def series(self) -> str:
        return f"{L_LETTERS[self.l]}{twice(self.j)}/2"

    def __str__(self) -> str:
        return f"{self.n}{self.series}"


def parse_level(text: str) -> RydbergLevel:
    """``"43d5/2"`` -> ``RydbergLevel(43, 2, 2.5)``."""
    text = text.strip()
    i = 0
    while i < len(text) and text[i].isdigit():
        i += 1
    n = int(text[:i])
    l = L_LETTERS.index(text[i].lower())
    num, den = text[i + 1 :].split("/")
    return RydbergLevel(n, l, int(num) / int(den))


@dataclass(frozen=True)
class QuantumDefectModel:
    """Per-series Rydberg-Ritz defects ``{"d5/2": (delta0, delta2), ...}``."""

    series: dict = field(hash=False)
    rydberg_hz: float

    @classmethod
    def rubidium(cls, consts: dict | None = None) -> "QuantumDefectModel":
        consts = consts or load_constants()
        table = {k: tuple(v) for k, v in consts["quantum_defects"].items()}
        return cls(table, reduced_rydberg_hz(consts))

    @classmethod
    def hydrogenic(cls, rydberg_hz: float, lmax: int = 7) -> "QuantumDefectModel":
        table = {}
        for l in range(lmax + 1):
            for tj in {abs(2 * l - 1), 2 * l + 1}:
                table[f"{L_LETTERS[l]}{tj}/2"] = (0.0, 0.0)
        return cls(table, rydberg_hz)

    def coefficients(self, l: int, j: float) -> tuple[float, float]:
        key = f"{L_LETTERS[l]}{twice(j)}/2"
        try:
            return self.series[key]
        except KeyError:
            raise MissingSeriesError(
                f"no quantum defect series {key!r} (have {sorted(self.series)})"
            ) from None

    def defect(self, n: int, l: int, j: float) -> float:
        d0, d2 = self.coefficients(l, j)
        return d0 + d2 / (n - d0) ** 2

    def n_star(self, level: RydbergLevel) -> float:
        return level.n - self.defect(level.n, level.l, level.j)


def level_energy(level: RydbergLevel, model: QuantumDefectModel) -> float:
    """Binding energy U in Hz (negative)."""
    return -model.rydberg_hz / model.n_star(level) ** 2


def _check_dipole_step(a: RydbergLevel, b: RydbergLevel):
    if abs(a.l - b.l) != 1 or abs(a.j - b.j) > 1:
        raise SelectionRuleError(f"{a} -> {b} is not an electric-dipole transition")


@dataclass(frozen=True)
class ForsterChannel:
    """Two-atom process ``initial[0] + initial[1] -> final[0] + final[1]``."""

    initial: tuple[RydbergLevel, RydbergLevel]
    final: tuple[RydbergLevel, RydbergLevel]

    def __post_init__(self):
        if self.is_elastic:
            return
        for a, b in zip(self.initial, self.final):
            _check_dipole_step(a, b)

    @property
    def is_elastic(self) -> bool:
        return tuple(self.initial) == tuple(self.final)

    def reversed(self) -> "ForsterChannel":
        return ForsterChannel(self.final, self.initial)

    def __str__(self) -> str:
        i1, i2 = self.initial
        f1, f2 = self.final
        return f"{i1}+{i2}->{f1}+{f2}"


def forster_defect(channel: ForsterChannel, model: QuantumDefectModel) -> float:
    """Energy defect of the channel divided by h, in Hz (final minus initial)."""
    if channel.is_elastic:
        return 0.0
    e = [level_energy(x, model) for x in (*channel.final, *channel.initial)]
    return (e[0] + e[1]) - (e[2] + e[3])


def lande_gj(l: int, j: float, s: float = 0.5, g_s: float = 2.0) -> float:
    """Fine-structure g-factor; ``g_s = 2`` makes g_j(d5/2) = 6/5 exactly."""
    jj = j * (j + 1)
    return 1.0 + (g_s - 1.0) * (jj + s * (s + 1) - l * (l + 1)) / (2 * jj)


@dataclass(frozen=True)
class ZeemanStatePair:
    f: float
    m_f: float
    g_f: float
    l: int
    j: float
    m_j: float
    B: float
    g_j: float | None = None

    def __post_init__(self):
        if abs(twice(self.m_f)) > twice(self.f):
            raise ValueError(f"|m_f|={abs(self.m_f)} exceeds f={self.f}")
        if abs(twice(self.m_j)) > twice(self.j):
            raise ValueError(f"|m_j|={abs(self.m_j)} exceeds j={self.j}")
        if self.g_j is None:
            object.__setattr__(self, "g_j", lande_gj(self.l, self.j))


def zeeman_resonance_shift(pair: ZeemanStatePair, mu_b_over_h: float | None = None) -> float:
    """Shift of the ground -> Rydberg two-photon resonance, in Hz."""
    if mu_b_over_h is None:
        mu_b_over_h = load_constants()["mu_b_over_h_hz_per_t"]
    return mu_b_over_h * pair.B * (pair.g_j * pair.m_j - pair.g_f * pair.m_f)


def dipole_scale_estimate(
    n: int, model: QuantumDefectModel | None = None, l: int = 2, j: float = 2.5
) -> float:
    """Order-of-magnitude dipole moment n*^2, in units of e*a0.

    Only meant as a scale; use :func:`radial_matrix_element` for numbers that
    enter calculations.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    model = model or QuantumDefectModel.rubidium()
    return (n - model.defect(n, l, j)) ** 2


def radial_matrix_element(
    a: RydbergLevel, b: RydbergLevel, model: QuantumDefectModel | None = None
) -> float:
    """Semiclassical radial integral |<a|r|b>| in units of a0.

    Correspondence-principle (Kaulakys-type) evaluation: the matrix element is
    the half-orbit average of ``r * cos(s*(pi - M) - dl*(pi - phi))`` over a
    Kepler orbit with ``nc = 2 n*_a n*_b/(n*_a + n*_b)`` and
    ``lc = max(l_a, l_b)``, where ``M`` is the mean anomaly, ``phi`` the polar
    angle, ``s = n*_b - n*_a`` and ``dl = l_b - l_a``. Phases are referenced to
    the outer turning point, where quantum-defect wavefunctions share their
    boundary condition; this is what keeps fractional ``s`` accurate. Only
    the magnitude is returned.
    """
    if abs(a.l - b.l) != 1:
        raise SelectionRuleError(f"<{a}|r|{b}> needs |Delta l| = 1")
    model = model or QuantumDefectModel.rubidium()
    na, nb = model.n_star(a), model.n_star(b)
    return _kepler_dipole(na, nb, max(a.l, b.l), b.l - a.l)


def _kepler_dipole(na: float, nb: float, lc: int, dl: int) -> float:
    s = nb - na
    nc = 2.0 * na * nb / (na + nb)
    ecc = math.sqrt(max(0.0, 1.0 - (lc / nc) ** 2))
    minor = math.sqrt(1.0 - ecc * ecc)

    def integrand(xi):
        c, sn = math.cos(xi), math.sin(xi)
        mean_anomaly = xi - ecc * sn
        phi = math.atan2(minor * sn, c - ecc)
        rr = 1.0 - ecc * c
        # r dM = rr * rr dxi (in units of nc^2)
        return rr * rr * math.cos(s * (math.pi - mean_anomaly) - dl * (math.pi - phi))

    val = integrate.quad(integrand, 0.0, math.pi, limit=400)[0] / math.pi
    return nc * nc * abs(val)
