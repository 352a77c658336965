import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydflop.analysis import fit_damped_cosine
from rydflop.constants import C, EPS0, KB, TWO_PI, rb87_mass_kg
from rydflop.pulses import (
    AdiabaticityWarning,
    BeamParams,
    DopplerModel,
    PulseParams,
    SequenceStep,
    default_dipoles,
    doppler_averaged_flop,
    doppler_detuning_sample,
    double_pulse_curve,
    double_pulse_sequence,
    propagate_sequence,
    rabi_flop,
    rabi_from_beams,
    step_propagator,
)

MHZ = TWO_PI * 1e6
rates = st.floats(0.01, 5.0).map(lambda x: x * MHZ)
detunings = st.floats(-5.0, 5.0).map(lambda x: x * MHZ)
times = st.floats(0.0, 20e-6)


def fig3_beams():
    return BeamParams(1.85e-6, 10, 780), BeamParams(10.7e-3, 10, 480)


# ---------------------------------------------------------------- beams and Rabi frequencies


def test_beam_field_consistent_with_intensity():
    b = BeamParams(2e-3, 7.0, 480)
    assert 0.5 * C * EPS0 * b.peak_field**2 == pytest.approx(b.peak_intensity, rel=1e-14)
    assert b.peak_intensity == pytest.approx(2 * 2e-3 / (math.pi * (7e-6) ** 2), rel=1e-14)
    for bad in [dict(power_w=-1, waist_um=1), dict(power_w=1, waist_um=0)]:
        with pytest.raises(ValueError):
            BeamParams(wavelength_nm=780, **bad)


def test_derived_quantities_never_stale():
    p = PulseParams(2 * MHZ * 100, 3 * MHZ * 100, -TWO_PI * 5e9)
    assert p.omega_r == pytest.approx(p.omega_780 * p.omega_480 / (2 * abs(p.delta)), rel=1e-15)
    assert p.ground_light_shift == pytest.approx(p.omega_780**2 / (4 * p.delta), rel=1e-15)
    import dataclasses

    q = dataclasses.replace(p, omega_780=2 * p.omega_780)
    assert q.omega_r == pytest.approx(2 * p.omega_r) and q.ground_light_shift == pytest.approx(4 * p.ground_light_shift)


def test_adiabaticity_flag():
    with pytest.warns(AdiabaticityWarning):
        p = PulseParams(MHZ * 100, MHZ * 100, MHZ * 500)
    assert not p.adiabatic
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert PulseParams(MHZ * 100, MHZ * 100, MHZ * 3400).adiabatic
    with pytest.raises(ValueError):
        PulseParams(1.0, 1.0, 0.0)


def test_rabi_from_beams_power_scaling():
    b780, b480 = fig3_beams()
    p1 = rabi_from_beams(b780, b480, -TWO_PI * 3.4e9)
    p2 = rabi_from_beams(
        BeamParams(2 * b780.power_w, 10, 780), BeamParams(2 * b480.power_w, 10, 480), -TWO_PI * 3.4e9
    )
    assert p2.omega_r == pytest.approx(2 * p1.omega_r, rel=1e-14)
    with pytest.raises(ValueError):
        rabi_from_beams(b780, b480, 0.0)


def test_rabi_from_beams_definition():
    # Omega_i = |angular factor| d_i E_i / hbar on the m = 1/2 pi path
    from rydflop.constants import A0, E_CHARGE, HBAR

    b780, b480 = fig3_beams()
    d780, d480 = default_dipoles()
    p = rabi_from_beams(b780, b480, -TWO_PI * 3.4e9)
    # <5s 1/2; 1 0|5p3/2 1/2>/2 = sqrt(2/3)/2 and <3/2 1/2; 1 0|5/2 1/2>/sqrt(6) = sqrt(3/5)/sqrt(6)
    f780 = math.sqrt(2 / 3) / 2
    f480 = math.sqrt(3 / 5) / math.sqrt(6)
    assert p.omega_780 == pytest.approx(f780 * d780 * E_CHARGE * A0 * b780.peak_field / HBAR, rel=1e-12)
    assert p.omega_480 == pytest.approx(f480 * d480 * E_CHARGE * A0 * b480.peak_field / HBAR, rel=1e-12)


def test_light_shift_inversion():
    # s_g = 2pi x 0.58 MHz at Delta = -2pi x 3.8 GHz means Omega_780 = 2pi x 93.9 MHz
    om = math.sqrt(4 * TWO_PI * 3.8e9 * TWO_PI * 0.58e6)
    assert om / MHZ == pytest.approx(93.8, rel=0.01)
    p = PulseParams(om, om, -TWO_PI * 3.8e9)
    assert abs(p.ground_light_shift) / MHZ == pytest.approx(0.58, rel=1e-12)


# ---------------------------------------------------------------- Rabi flopping


def test_pi_pulse():
    p = PulseParams.from_rabi(0.49 * MHZ)
    assert p.omega_r == pytest.approx(0.49 * MHZ, rel=1e-14)
    assert rabi_flop(p, math.pi / p.omega_r)[1] == pytest.approx(1.0, abs=1e-14)
    assert rabi_flop(p, 1.02e-6)[1] > 0.999


def test_detuned_max_half():
    p = PulseParams.from_rabi(MHZ, delta2=MHZ)
    t = np.linspace(0, 5e-6, 20001)
    assert rabi_flop(p, t)[1].max() == pytest.approx(0.5, abs=1e-8)


def test_light_shift_bookkeeping():
    p = PulseParams(100 * MHZ, 80 * MHZ, -TWO_PI * 3e9)
    assert p.effective_detuning == 0.0  # default: lasers on the shifted resonance
    q = PulseParams(100 * MHZ, 80 * MHZ, -TWO_PI * 3e9, delta2=0.0)
    assert q.effective_detuning == pytest.approx(-q.resonance_shift)


@settings(max_examples=200, deadline=None)
@given(rates, detunings, times, st.floats(-2, 2))
def test_gauge_invariance(om, d, t, shift_mhz):
    # shifting delta2 by the light shift and dropping the light-shift term is the same dynamics
    leg = math.sqrt(2 * TWO_PI * 3.4e9 * om)
    with_ls = PulseParams(leg, leg * (1 + shift_mhz / 10), -TWO_PI * 3.4e9, light_shifts=True)
    with_ls = PulseParams(with_ls.omega_780, with_ls.omega_480, with_ls.delta, delta2=d + with_ls.resonance_shift)
    no_ls = PulseParams(with_ls.omega_780, with_ls.omega_480, with_ls.delta, delta2=d, light_shifts=False)
    a, b = rabi_flop(with_ls, t), rabi_flop(no_ls, t)
    assert a[1] == pytest.approx(b[1], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(rates, detunings, times)
def test_probabilities_bounded(om, d, t):
    p = PulseParams.from_rabi(om, delta2=d)
    pg, pr = rabi_flop(p, t)
    assert -1e-15 <= pr <= 1 + 1e-15 and pg + pr == pytest.approx(1.0, abs=1e-15)


def test_scattering_damps():
    p = PulseParams.from_rabi(MHZ, gamma_5p=TWO_PI * 6e6)
    t = np.linspace(0, 50e-6, 2001)
    pr = rabi_flop(p, t)[1]
    assert p.scattering_rate > 0
    assert abs(pr[-200:] - 0.5).max() < abs(pr[:200] - 0.5).max()


# ---------------------------------------------------------------- sequences


def test_propagators_unitary_random():
    # 10^6 random steps; columns must stay orthonormal
    rng = np.random.default_rng(1)
    draws = rng.uniform(-1, 1, (1_000_000, 3)) * [10 * MHZ, 10 * MHZ, 10e-6]
    worst = 0.0
    for om, d, t in draws:
        U = step_propagator(abs(om), d, abs(t))
        c0, c1 = U[:, 0], U[:, 1]
        worst = max(worst, abs(np.vdot(c0, c0) - 1), abs(np.vdot(c1, c1) - 1), abs(np.vdot(c0, c1)))
    assert worst < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(rates, detunings, times, st.booleans()), min_size=1, max_size=8))
def test_sequence_preserves_norm(steps):
    seq = [SequenceStep("pulse" if p else "gap", t, d, om) for om, d, t, p in steps]
    assert np.linalg.norm(propagate_sequence(seq)) == pytest.approx(1.0, abs=1e-12)


def test_rabi_flop_equals_single_step():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        om = rng.uniform(0.01, 5) * MHZ
        d = rng.uniform(-5, 5) * MHZ
        t = rng.uniform(0, 20e-6)
        p = PulseParams.from_rabi(om, delta2=d)
        psi = propagate_sequence([SequenceStep("pulse", t, p.effective_detuning, p.omega_r)])
        assert abs(psi[1]) ** 2 == pytest.approx(rabi_flop(p, t)[1], abs=1e-10)


def test_propagator_against_expm():
    from scipy.linalg import expm

    for om, d, t in [(1.0, 0.3, 2.0), (0.0, 2.0, 1.0), (2.0, 0.0, 0.7), (0.0, 0.0, 1.0)]:
        H = np.array([[0, om / 2], [om / 2, -d]])
        np.testing.assert_allclose(step_propagator(om, d, t), expm(-1j * H * t), atol=1e-13)


def test_gap_phase():
    psi = propagate_sequence([SequenceStep("gap", 1.3e-6, 2 * MHZ)], initial=[1 / math.sqrt(2), 1 / math.sqrt(2)])
    assert psi[1] / psi[0] == pytest.approx(np.exp(1j * 2 * MHZ * 1.3e-6), abs=1e-12)


def test_two_half_pulses_make_pi():
    om = 0.7 * MHZ
    seq = double_pulse_sequence(om, math.pi / om, 0.0, 0.0)
    assert abs(propagate_sequence(seq)[1]) ** 2 == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-3, 3), st.floats(0, 5e-6))
def test_ramsey_formula(om_mhz, dg_mhz, tg):
    om = om_mhz * MHZ
    seq = double_pulse_sequence(om, math.pi / om, tg, dg_mhz * MHZ)
    pr = abs(propagate_sequence(seq)[1]) ** 2
    assert pr == pytest.approx(0.5 * (1 + math.cos(dg_mhz * MHZ * tg)), abs=1e-8)


def test_negative_duration():
    with pytest.raises(ValueError):
        SequenceStep("pulse", -1e-6)
    with pytest.raises(ValueError):
        SequenceStep("wait", 1e-6)


def test_double_pulse_curve_defaults_gap_to_light_shift():
    p = PulseParams(90 * MHZ, 30 * MHZ, -TWO_PI * 3.8e9)
    t = np.linspace(0, 4e-6, 41)
    a = double_pulse_curve(p, t)
    b = double_pulse_curve(p, t, gap_detuning=p.ground_light_shift)
    np.testing.assert_array_equal(a, b)
    c = double_pulse_curve(p, t, t_gap=0.0)
    np.testing.assert_allclose(c, rabi_flop(p, t)[1], atol=1e-12)


# ---------------------------------------------------------------- Doppler


def test_doppler_width():
    m = DopplerModel(1e-3)
    assert m.k_eff == pytest.approx(TWO_PI * abs(1 / 480e-9 - 1 / 780e-9), rel=1e-14)
    assert m.k_eff / TWO_PI / 1e6 == pytest.approx(0.801, rel=1e-3)
    assert m.sigma_v == pytest.approx(math.sqrt(KB * 1e-3 / rb87_mass_kg()), rel=1e-14)
    assert m.sigma_v == pytest.approx(0.31, rel=0.01)
    assert m.sigma_detuning / TWO_PI == pytest.approx(250e3, rel=0.05)
    co = DopplerModel(1e-3, counter_propagating=False)
    assert co.k_eff == pytest.approx(TWO_PI * (1 / 480e-9 + 1 / 780e-9), rel=1e-14)


def test_doppler_zero_temperature():
    s = doppler_detuning_sample(DopplerModel(0.0), np.random.default_rng(0), 1000)
    assert np.all(s == 0)


def test_doppler_sample_variance():
    m = DopplerModel(1e-3)
    n = 100_000
    s = doppler_detuning_sample(m, np.random.default_rng(3), n)
    var_true = m.k_eff**2 * KB * 1e-3 / m.mass_kg
    se = var_true * math.sqrt(2 / (n - 1))
    assert abs(s.var(ddof=1) - var_true) < 3 * se


def test_doppler_average_t0_and_guards():
    p = PulseParams.from_rabi(0.49 * MHZ)
    t = np.linspace(0, 8e-6, 81)
    tr = doppler_averaged_flop(p, DopplerModel(0.0), t, 100)
    np.testing.assert_allclose(tr.value, rabi_flop(p, t)[0], rtol=0, atol=1e-14)
    np.testing.assert_allclose(tr.stderr, 0, atol=1e-15)
    with pytest.raises(ValueError):
        doppler_averaged_flop(p, DopplerModel(1e-3), t, 99)


def test_doppler_average_thread_independent():
    p = PulseParams.from_rabi(0.49 * MHZ)
    t = np.linspace(0, 8e-6, 41)
    a = doppler_averaged_flop(p, DopplerModel(1e-3), t, 1000, seed=5, threads=1)
    b = doppler_averaged_flop(p, DopplerModel(1e-3), t, 1000, seed=5, threads=4)
    assert a.value.tobytes() == b.value.tobytes() and a.stderr.tobytes() == b.stderr.tobytes()


def test_damping_increases_with_temperature():
    p = PulseParams.from_rabi(0.49 * MHZ)
    t = np.linspace(0, 8e-6, 161)
    for seed in (0, 1, 2):
        taus = [
            fit_damped_cosine(t, doppler_averaged_flop(p, DopplerModel(T), t, 2000, seed=seed).value).tau
            for T in (0.25e-3, 0.5e-3, 1e-3, 2e-3)
        ]
        assert np.all(np.diff(taus) < 0), taus
