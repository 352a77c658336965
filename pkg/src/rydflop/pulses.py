"""Two-photon ground -> Rydberg excitation of a single atom.

The 5p3/2 intermediate level is adiabatically eliminated, leaving a two-level
atom with (hbar = 1, angular frequencies in rad/s)

    H = (Omega_R / 2) sigma_x - delta_eff |r><r|.

The excitation path is |5s1/2 m_j=1/2> -> |5p3/2 m_j=1/2> -> |nd5/2 m_j=1/2>
with z polarized light on both legs. The ground hyperfine state
|f=2, m_f=2> is the stretched |m_j=1/2, m_i=3/2> state, so the fine-structure
path is exact when the intermediate detuning swamps the 5p hyperfine
splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import angular
from .constants import A0, C, E_CHARGE, EPS0, HBAR, KB, TWO_PI, load_constants, rb87_mass_kg
from .levels import QuantumDefectModel, RydbergLevel, parse_level, radial_matrix_element
from .mc import TraceResult, chunk_bounds, ordered_map, substream

__all__ = [
    "BeamParams",
    "PulseParams",
    "SequenceStep",
    "DopplerModel",
    "AdiabaticityWarning",
    "rabi_from_beams",
    "default_dipoles",
    "rydberg_leg_estimate",
    "rabi_flop",
    "step_propagator",
    "propagate_sequence",
    "double_pulse_sequence",
    "double_pulse_curve",
    "doppler_detuning_sample",
    "doppler_averaged_flop",
]

GROUND = RydbergLevel(5, 0, 0.5)
INTERMEDIATE = RydbergLevel(5, 1, 1.5)


class AdiabaticityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BeamParams:
    power_w: float
    waist_um: float
    wavelength_nm: float
    polarization: str = "z"

    def __post_init__(self):
        if self.power_w < 0:
            raise ValueError("beam power must be >= 0")
        if not self.waist_um > 0:
            raise ValueError("beam waist must be > 0")
        if self.polarization != "z":
            raise ValueError("only z polarization is modelled")

    @property
    def peak_intensity(self) -> float:
        """W/m^2 on axis."""
        w = self.waist_um * 1e-6
        return 2.0 * self.power_w / (math.pi * w * w)

    @property
    def peak_field(self) -> float:
        """Field amplitude on axis, V/m: sqrt(4P / (pi eps0 c w^2))."""
        w = self.waist_um * 1e-6
        return math.sqrt(4.0 * self.power_w / (math.pi * EPS0 * C * w * w))


@dataclass(frozen=True)
class PulseParams:
    """Single-photon Rabi frequencies and detunings, all in rad/s.

    ``delta2`` is the two-photon laser detuning from the bare resonance. The
    default ``None`` parks the lasers on the light-shifted resonance, so the
    effective detuning during a pulse is zero. With ``light_shifts=False``
    the AC Stark terms are dropped from ``effective_detuning``.
    """

    omega_780: float
    omega_480: float
    delta: float
    delta2: float | None = None
    light_shifts: bool = True
    gamma_5p: float = 0.0  # intermediate-state decay rate; 0 disables scattering

    def __post_init__(self):
        if self.delta == 0:
            raise ValueError("intermediate detuning must be non-zero")
        if abs(self.delta) < 10 * max(abs(self.omega_780), abs(self.omega_480)):
            import warnings

            warnings.warn(
                "intermediate detuning is not large compared to the single-photon "
                "Rabi frequencies; adiabatic elimination is questionable",
                AdiabaticityWarning,
                stacklevel=2,
            )

    @classmethod
    def from_rabi(cls, omega_r: float, delta: float = TWO_PI * -3.4e9, **kw) -> "PulseParams":
        """Equal single-photon Rabi frequencies giving two-photon ``omega_r``.

        Convenient for dynamics specified directly by Omega_R. Light shifts
        default to off here since the leg split is arbitrary.
        """
        kw.setdefault("light_shifts", False)
        leg = math.sqrt(2.0 * abs(delta) * omega_r)
        return cls(leg, leg, delta, **kw)

    @property
    def adiabatic(self) -> bool:
        return abs(self.delta) >= 10 * max(abs(self.omega_780), abs(self.omega_480))

    @property
    def omega_r(self) -> float:
        return abs(self.omega_780 * self.omega_480 / (2.0 * self.delta))

    @property
    def ground_light_shift(self) -> float:
        """s_g = Omega_780^2 / 4 Delta (signed)."""
        return self.omega_780**2 / (4.0 * self.delta)

    @property
    def rydberg_light_shift(self) -> float:
        return self.omega_480**2 / (4.0 * self.delta)

    @property
    def resonance_shift(self) -> float:
        """Light shift of the two-photon resonance, s_r - s_g."""
        return self.rydberg_light_shift - self.ground_light_shift

    @property
    def bare_detuning(self) -> float:
        if self.delta2 is not None:
            return self.delta2
        return self.resonance_shift if self.light_shifts else 0.0

    @property
    def effective_detuning(self) -> float:
        d = self.bare_detuning
        return d - self.resonance_shift if self.light_shifts else d

    @property
    def scattering_rate(self) -> float:
        return self.omega_780**2 * self.gamma_5p / (4.0 * self.delta**2)


def rydberg_leg_estimate(
    level: RydbergLevel | str = "43d5/2", qd: QuantumDefectModel | None = None
) -> float:
    """Uncalibrated reduced element <level||er||5p3/2> (e a0) from the semiclassical radial integral."""
    from .vdw import reduced_angular_factor

    level = parse_level(level) if isinstance(level, str) else level
    qd = qd or QuantumDefectModel.rubidium()
    radial = radial_matrix_element(INTERMEDIATE, level, qd)
    return radial * reduced_angular_factor(INTERMEDIATE, level)


def default_dipoles(level: RydbergLevel | str = "43d5/2", consts: dict | None = None) -> tuple[float, float]:
    """Reduced elements (e a0) for the 780 and 480 nm legs.

    The 780 nm value is the literature <5p3/2||er||5s1/2>. The Rydberg leg is
    the semiclassical estimate times the frozen ``rydberg_leg_calibration``
    from the constants file.
    """
    consts = consts or load_constants()
    dip = consts["dipoles"]
    return dip["d_5s12_5p32_ea0"], dip["rydberg_leg_calibration"] * rydberg_leg_estimate(level)


def _path_factor(a: RydbergLevel, b: RydbergLevel, m: float = 0.5) -> float:
    # <b m|T_0|a m> = <ja m; 1 0|jb m> <b||T||a> / sqrt(2 jb + 1)
    return angular.clebsch_gordan(a.j, m, 1, 0, b.j, m) / math.sqrt(2 * b.j + 1)


def rabi_from_beams(
    b780: BeamParams,
    b480: BeamParams,
    delta: float,
    dipoles: tuple[float, float] | None = None,
    level: RydbergLevel | str = "43d5/2",
    **kw,
) -> PulseParams:
    """Single-photon Rabi frequencies from beam powers, at the beam centre.

    ``delta`` is the intermediate detuning in rad/s; ``dipoles`` the reduced
    elements (e a0) of the two legs, defaulting to :func:`default_dipoles`.
    """
    if delta == 0:
        raise ValueError("intermediate detuning must be non-zero")
    level = parse_level(level) if isinstance(level, str) else level
    d780, d480 = dipoles if dipoles is not None else default_dipoles(level)
    f780 = abs(_path_factor(GROUND, INTERMEDIATE)) * d780 * E_CHARGE * A0
    f480 = abs(_path_factor(INTERMEDIATE, level)) * d480 * E_CHARGE * A0
    return PulseParams(
        abs(f780) * b780.peak_field / HBAR,
        abs(f480) * b480.peak_field / HBAR,
        delta,
        **kw,
    )


def rabi_flop(params: PulseParams, t, detuning_offset=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Ground and Rydberg probabilities after a square pulse of length ``t``.

    ``P_r = (Omega^2 / Omega'^2) sin^2(Omega' t / 2)`` with
    ``Omega' = sqrt(Omega^2 + delta_eff^2)``. ``detuning_offset`` (rad/s) is
    added to the effective detuning and may be an array broadcasting
    against ``t``. A non-zero ``gamma_5p`` damps the oscillation envelope by
    the 5p scattering rate.
    """
    t = np.asarray(t, dtype=float)
    om = params.omega_r
    d = params.effective_detuning + np.asarray(detuning_offset, dtype=float)
    gen = np.sqrt(om * om + d * d)
    amp = np.divide(om * om, gen * gen, out=np.zeros(np.broadcast(gen, t).shape), where=gen > 0)
    if params.gamma_5p > 0:
        pr = 0.5 * amp * (1.0 - np.exp(-params.scattering_rate * t) * np.cos(gen * t))
    else:
        pr = amp * np.sin(0.5 * gen * t) ** 2
    return 1.0 - pr, pr


@dataclass(frozen=True)
class SequenceStep:
    kind: str  # "pulse" or "gap"
    duration: float  # s
    detuning: float = 0.0  # rad/s
    omega: float = 0.0  # rad/s, ignored for gaps

    def __post_init__(self):
        if self.kind not in ("pulse", "gap"):
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.duration < 0:
            raise ValueError("step duration must be >= 0")
        if self.kind == "gap" and self.omega != 0.0:
            object.__setattr__(self, "omega", 0.0)


def step_propagator(omega: float, detuning: float, t: float) -> np.ndarray:
    """exp(-i H t) for H = [[0, omega/2], [omega/2, -detuning]], basis (g, r)."""
    half = 0.5 * math.sqrt(omega * omega + detuning * detuning)
    phase = np.exp(0.5j * detuning * t)
    c = math.cos(half * t)
    if half == 0.0:
        return np.diag([1.0 + 0j, np.exp(1j * detuning * t)])
    s = math.sin(half * t) / (2.0 * half)
    # (omega sigma_x + detuning sigma_z) / (2 half) with sigma_z = diag(1, -1)
    u = np.array(
        [[c - 1j * s * detuning, -1j * s * omega], [-1j * s * omega, c + 1j * s * detuning]]
    )
    return phase * u


def propagate_sequence(steps, initial=None) -> np.ndarray:
    """Compose exact step propagators; returns the final (g, r) amplitudes.

    During a gap the Rydberg amplitude picks up ``exp(i detuning t)``
    relative to the ground amplitude.
    """
    psi = np.array([1.0 + 0j, 0.0]) if initial is None else np.asarray(initial, dtype=complex)
    for st in steps:
        if st.duration < 0:
            raise ValueError("step duration must be >= 0")
        psi = step_propagator(st.omega, st.detuning, st.duration) @ psi
    return psi


def double_pulse_sequence(
    omega_r: float, t_total: float, t_gap: float, gap_detuning: float, pulse_detuning: float = 0.0
) -> list[SequenceStep]:
    """Two equal pulses sharing a total pulse time ``t_total`` around a gap."""
    half = 0.5 * t_total
    return [
        SequenceStep("pulse", half, pulse_detuning, omega_r),
        SequenceStep("gap", t_gap, gap_detuning),
        SequenceStep("pulse", half, pulse_detuning, omega_r),
    ]


def double_pulse_curve(
    params: PulseParams,
    t_total,
    t_gap: float = 2e-6,
    gap_detuning: float | None = None,
    omega_r: float | None = None,
) -> np.ndarray:
    """Rydberg probability after the double-pulse sequence versus total pulse time.

    ``gap_detuning`` defaults to the ground light shift s_g, which is absent
    while the 780 nm light is off.
    """
    om = params.omega_r if omega_r is None else omega_r
    gd = params.ground_light_shift if gap_detuning is None else gap_detuning
    out = []
    for tt in np.atleast_1d(np.asarray(t_total, dtype=float)):
        psi = propagate_sequence(double_pulse_sequence(om, tt, t_gap, gd, params.effective_detuning))
        out.append(abs(psi[1]) ** 2)
    return np.array(out)


@dataclass(frozen=True)
class DopplerModel:
    temperature_k: float
    mass_kg: float = field(default_factory=rb87_mass_kg)
    wavelength_780_nm: float = 780.0
    wavelength_480_nm: float = 480.0
    counter_propagating: bool = True

    def __post_init__(self):
        if self.temperature_k < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def k_eff(self) -> float:
        """Two-photon wavevector magnitude, rad/m."""
        k1 = 1.0 / (self.wavelength_780_nm * 1e-9)
        k2 = 1.0 / (self.wavelength_480_nm * 1e-9)
        return TWO_PI * (abs(k2 - k1) if self.counter_propagating else k1 + k2)

    @property
    def sigma_v(self) -> float:
        return math.sqrt(KB * self.temperature_k / self.mass_kg)

    @property
    def sigma_detuning(self) -> float:
        """rad/s"""
        return self.k_eff * self.sigma_v

    def sample(self, rng: np.random.Generator, size=None):
        return self.k_eff * self.sigma_v * rng.standard_normal(size)


def doppler_detuning_sample(model: DopplerModel, rng: np.random.Generator, size=None):
    """Doppler shift ``k_eff * v`` in rad/s with v ~ Normal(0, sigma_v)."""
    return model.sample(rng, size)


_CHUNK = 256


def doppler_averaged_flop(
    params: PulseParams,
    model: DopplerModel,
    t,
    n_samples: int = 2000,
    seed: int = 0,
    threads: int | None = None,
    keep_samples: bool = False,
) -> TraceResult:
    """Ground-state probability averaged over thermal Doppler shifts.

    Samples are drawn in chunks of 256, chunk ``k`` using substream
    ``(seed, k)``; the output does not depend on ``threads``.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 Doppler samples")
    t = np.asarray(t, dtype=float)

    def work(bounds):
        lo, hi = bounds
        rng = substream(seed, lo // _CHUNK)
        dd = doppler_detuning_sample(model, rng, hi - lo)
        return rabi_flop(params, t[None, :], dd[:, None])[0]

    rows = ordered_map(work, chunk_bounds(n_samples, _CHUNK), threads)
    samples = np.vstack(rows)
    meta = {"sigma_detuning_hz": model.sigma_detuning / TWO_PI, "seed": seed}
    return TraceResult.from_samples(t, samples, meta, keep=keep_samples)
