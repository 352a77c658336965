"""Angular momentum algebra.

Conventions used everywhere in the package:

* Condon-Shortley phases.
* Magnetic sublevels are ordered by *descending* m, i.e. index 0 is m = +j.
* Half-integers are handled internally as doubled integers, so triangle and
  parity checks are exact.

Coefficients are evaluated from exact rational expressions (Python integers
and :class:`fractions.Fraction`) and rounded to double precision only at the
very end, which keeps them accurate well beyond j = 99/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real

import numpy as np

__all__ = [
    "AngularMomentum",
    "RotationSpec",
    "AngularWarning",
    "twice",
    "m_values",
    "triangle",
    "wigner_3j",
    "clebsch_gordan",
    "wigner_6j",
    "wigner_d_matrix",
    "dipole_component_matrix",
]


class AngularWarning(UserWarning):
    """Raised (as a warning) when an angular factor vanishes identically."""


def twice(x) -> int:
    """Return ``2*x`` as an int, rejecting anything that is not a half-integer."""
    if isinstance(x, AngularMomentum):
        return x.twice
    if isinstance(x, (int, np.integer)):
        return 2 * int(x)
    if isinstance(x, Fraction):
        d = 2 * x
        if d.denominator != 1:
            raise ValueError(f"{x} is not an integer or half-integer")
        return int(d)
    if isinstance(x, Real):
        d = 2.0 * float(x)
        r = round(d)
        if abs(d - r) > 1e-9:
            raise ValueError(f"{x} is not an integer or half-integer")
        return int(r)
    raise TypeError(f"cannot interpret {x!r} as an angular momentum")


@dataclass(frozen=True)
class AngularMomentum:
    """A non-negative integer or half-integer, stored as twice its value."""

    twice: int

    def __post_init__(self):
        if self.twice < 0:
            raise ValueError("angular momentum must be non-negative")

    @classmethod
    def of(cls, value) -> "AngularMomentum":
        return cls(twice(value))

    @property
    def value(self) -> float:
        return self.twice / 2

    @property
    def dim(self) -> int:
        return self.twice + 1

    def projections(self) -> np.ndarray:
        return m_values(self.value)

    def allows(self, m) -> bool:
        tm = twice(m)
        return abs(tm) <= self.twice and (self.twice - tm) % 2 == 0


@dataclass(frozen=True)
class RotationSpec:
    """Rotation of the quantization axis by ``beta`` about y.

    ``beta = pi/2`` takes z into x.
    """

    beta: float
    j: AngularMomentum

    def __post_init__(self):
        if not isinstance(self.j, AngularMomentum):
            object.__setattr__(self, "j", AngularMomentum.of(self.j))


def m_values(j) -> np.ndarray:
    """Projections ``j, j-1, ..., -j`` (descending)."""
    tj = twice(j)
    return np.arange(tj, -tj - 1, -2) / 2.0


def triangle(ta: int, tb: int, tc: int) -> bool:
    """Triangle rule on doubled arguments (integer perimeter included)."""
    return (
        ta >= 0
        and tb >= 0
        and tc >= 0
        and abs(ta - tb) <= tc <= ta + tb
        and (ta + tb + tc) % 2 == 0
    )


def _f(n2: int) -> int:
    # factorial of a doubled argument that must be an even non-negative int
    return math.factorial(n2 // 2)


def _delta_sq(ta: int, tb: int, tc: int) -> Fraction:
    return Fraction(
        _f(ta + tb - tc) * _f(ta - tb + tc) * _f(-ta + tb + tc),
        _f(ta + tb + tc + 2),
    )


def _signed_sqrt(sign_sum: Fraction, pref_sq: Fraction) -> float:
    # sign(sum) * sqrt(pref_sq * sum**2), rounded once
    if sign_sum == 0:
        return 0.0
    val = math.sqrt(float(pref_sq * sign_sum * sign_sum))
    return val if sign_sum > 0 else -val


@lru_cache(maxsize=65536)
def _three_j(tj1, tj2, tj3, tm1, tm2, tm3) -> float:
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if not triangle(tj1, tj2, tj3):
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if abs(tm) > tj or (tj - tm) % 2:
            return 0.0
    pref = _delta_sq(tj1, tj2, tj3) * (
        _f(tj1 + tm1) * _f(tj1 - tm1) * _f(tj2 + tm2)
        * _f(tj2 - tm2) * _f(tj3 + tm3) * _f(tj3 - tm3)
    )
    kmin = max(0, (tj2 - tj3 - tm1) // 2, (tj1 - tj3 + tm2) // 2)
    kmax = min((tj1 + tj2 - tj3) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        k2 = 2 * k
        den = (
            math.factorial(k)
            * _f(tj3 - tj2 + k2 + tm1)
            * _f(tj3 - tj1 + k2 - tm2)
            * _f(tj1 + tj2 - tj3 - k2)
            * _f(tj1 - k2 - tm1)
            * _f(tj2 - k2 + tm2)
        )
        s += Fraction(-1 if k % 2 else 1, den)
    phase = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    return phase * _signed_sqrt(s, pref)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol. Returns 0 for any selection-rule violation."""
    return _three_j(twice(j1), twice(j2), twice(j3), twice(m1), twice(m2), twice(m3))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Zero when ``M != m1 + m2`` or the triangle rule fails. Raises
    ``ValueError`` for arguments that are not half-integers.
    """
    tj1, tm1, tj2, tm2, tJ, tM = (twice(x) for x in (j1, m1, j2, m2, J, M))
    if tM != tm1 + tm2:
        return 0.0
    three = _three_j(tj1, tj2, tJ, tm1, tm2, -tM)
    if three == 0.0:
        return 0.0
    phase = -1 if ((tj1 - tj2 + tM) // 2) % 2 else 1
    return phase * math.sqrt(tJ + 1) * three


@lru_cache(maxsize=65536)
def _six_j(ta, tb, tc, td, te, tf) -> float:
    triads = ((ta, tb, tc), (ta, te, tf), (td, tb, tf), (td, te, tc))
    if not all(triangle(*t) for t in triads):
        return 0.0
    pref = Fraction(1)
    for t in triads:
        pref *= _delta_sq(*t)
    s1, s2, s3, s4 = (sum(t) for t in triads)
    p1, p2, p3 = ta + tb + td + te, tb + tc + te + tf, tc + ta + tf + td
    tmin = max(s1, s2, s3, s4) // 2
    tmax = min(p1, p2, p3) // 2
    s = Fraction(0)
    for t in range(tmin, tmax + 1):
        t2 = 2 * t
        den = (
            _f(t2 - s1) * _f(t2 - s2) * _f(t2 - s3) * _f(t2 - s4)
            * _f(p1 - t2) * _f(p2 - t2) * _f(p3 - t2)
        )
        s += Fraction((-1 if t % 2 else 1) * math.factorial(t + 1), den)
    return _signed_sqrt(s, pref)


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6} by the Racah formula.

    Any triad violating the triangle rule gives 0 (no exception).
    """
    return _six_j(*(twice(x) for x in (j1, j2, j3, j4, j5, j6)))


@lru_cache(maxsize=4096)
def _small_d(tj: int, tmp: int, tm: int, beta: float) -> float:
    c = math.cos(beta / 2)
    s = math.sin(beta / 2)
    jp, jm = (tj + tmp) // 2, (tj - tmp) // 2
    kp, km = (tj + tm) // 2, (tj - tm) // 2
    norm = math.sqrt(
        math.factorial(jp) * math.factorial(jm) * math.factorial(kp) * math.factorial(km)
    )
    dm = (tmp - tm) // 2  # m' - m
    total = 0.0
    for k in range(max(0, -dm), min(kp, jm) + 1):
        den = (
            math.factorial(kp - k)
            * math.factorial(k)
            * math.factorial(jm - k)
            * math.factorial(k + dm)
        )
        pc = tj - 2 * k - dm
        ps = 2 * k + dm
        term = norm / den * c**pc * s**ps
        total += -term if (k + dm) % 2 else term
    return total


def wigner_d_matrix(spec: RotationSpec) -> np.ndarray:
    """Real Wigner small-d matrix d^j_{m'm}(beta) = <j m'|exp(-i beta J_y)|j m>.

    Rows index m', columns index m, both in descending order. For j = 1/2
    this is ``[[cos(b/2), -sin(b/2)], [sin(b/2), cos(b/2)]]``.
    """
    tj = spec.j.twice
    beta = float(spec.beta)
    tms = range(tj, -tj - 1, -2)
    return np.array([[_small_d(tj, tmp, tm, beta) for tm in tms] for tmp in tms])


def dipole_component_matrix(ja, jb, q: int) -> np.ndarray:
    """Angular factors of the rank-1 spherical component ``q`` between j-manifolds.

    Returns the ``(2jb+1, 2ja+1)`` matrix with element (m_b, m_a) equal to
    ``<ja m_a; 1 q | jb m_b>``. Reduced matrix elements are the caller's job.
    """
    if q not in (-1, 0, 1):
        raise ValueError("q must be -1, 0 or +1")
    ta, tb = twice(ja), twice(jb)
    out = np.zeros((tb + 1, ta + 1))
    if not triangle(ta, 2, tb):
        warnings.warn(
            f"|ja - jb| > 1 for ja={ta / 2}, jb={tb / 2}: dipole factors vanish",
            AngularWarning,
            stacklevel=2,
        )
        return out
    for ia, tma in enumerate(range(ta, -ta - 1, -2)):
        tmb = tma + 2 * q
        if abs(tmb) > tb:
            continue
        ib = (tb - tmb) // 2
        out[ib, ia] = clebsch_gordan(ta / 2, tma / 2, 1, q, tb / 2, tmb / 2)
    return out
