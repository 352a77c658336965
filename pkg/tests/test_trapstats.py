import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rydflop.analysis import DegenerateFitError
from rydflop.constants import KB, rb87_mass_kg
from rydflop.trapstats import (
    DetectionModel,
    LossModel,
    TrapModel,
    classify_atom_number,
    count_thresholds,
    drop_recapture,
    estimate_temperature,
    histogram_counts,
    misclassification_probability,
    preselection_experiment,
    probe_losses,
    sample_trapped,
)

DET = DetectionModel()
TRAP = TrapModel()


# ---------------------------------------------------------------- trap


def test_trap_frequencies_formula():
    m = rb87_mass_kg()
    u0 = KB * 10e-3
    w = 2.7e-6
    zr = math.pi * w**2 / 1030e-9
    assert TRAP.radial_frequency_hz == pytest.approx(math.sqrt(4 * u0 / (m * w**2)) / (2 * math.pi), rel=1e-14)
    assert TRAP.axial_frequency_hz == pytest.approx(math.sqrt(2 * u0 / (m * zr**2)) / (2 * math.pi), rel=1e-14)
    assert TRAP.radial_frequency_hz == pytest.approx(130e3, rel=0.15)


def test_potential_harmonic_expansion():
    m = TRAP.mass_kg
    h = 1e-9
    u0 = TRAP.potential(0.0, 0.0, 0.0)
    kx = (TRAP.potential(h, 0.0, 0.0) - 2 * u0 + TRAP.potential(-h, 0.0, 0.0)) / h**2
    kz = (TRAP.potential(0.0, 0.0, 1e-8) - 2 * u0 + TRAP.potential(0.0, 0.0, -1e-8)) / 1e-16
    assert math.sqrt(kx / m) == pytest.approx(TRAP.omega_radial, rel=1e-4)
    assert math.sqrt(kz / m) == pytest.approx(TRAP.omega_axial, rel=1e-4)
    assert u0 == pytest.approx(-TRAP.depth_j)


# ---------------------------------------------------------------- counts


def test_count_statistics():
    assert DET.single_atom_mean == pytest.approx(120.0)
    c = histogram_counts(1, DET, np.random.default_rng(0), 100_000)
    assert c.mean() == pytest.approx(120, abs=3 * math.sqrt(120 / 1e5))
    assert c.var() == pytest.approx(c.mean(), rel=0.02)
    assert np.all(histogram_counts(0, DET, np.random.default_rng(0), 1000) == 0)
    with pytest.raises(ValueError):
        histogram_counts(-1, DET, np.random.default_rng(0))


def test_classification():
    assert classify_atom_number(120, DET) == 1
    assert classify_atom_number(0, DET) == 0
    assert classify_atom_number(240, DET) == 2
    np.testing.assert_array_equal(classify_atom_number([59, 60, 179, 180], DET), [0, 1, 1, 2])
    np.testing.assert_allclose(count_thresholds(DET, 3), [60, 180, 300])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 3000))
def test_classification_pure_and_nearest(c):
    k = classify_atom_number(c, DET)
    assert k == classify_atom_number(c, DET)
    means = np.arange(21) * DET.single_atom_mean
    assert abs(c - means[k]) <= np.min(np.abs(c - means))


def test_misclassification_against_tail_sums():
    p = misclassification_probability(1, DET)
    ks = np.arange(0, 60)
    tail = stats.poisson.pmf(ks, 120).sum() + stats.poisson.sf(179, 120)
    assert p == pytest.approx(tail, rel=1e-6, abs=1e-15)
    assert p < 0.02
    # a dim probe where the tails matter: mean 6 counts, cross-check by sampling
    dim = DetectionModel(rate_per_s=500)
    q = misclassification_probability(1, dim)
    c = histogram_counts(1, dim, np.random.default_rng(5), 200_000)
    assert (classify_atom_number(c, dim) != 1).mean() == pytest.approx(q, abs=4 * math.sqrt(q / 2e5))


# ---------------------------------------------------------------- losses and preselection


def test_probe_losses_limits():
    rng = np.random.default_rng(0)
    n, at = probe_losses(np.array([0, 1, 2, 3, 4]), DET, LossModel(1e12, 1.0, math.inf), rng)
    np.testing.assert_array_equal(n, [0, 1, 0, 1, 0])
    np.testing.assert_allclose(at, n * DET.probe_time_s)
    n, at = probe_losses(np.full(20000, 1), DET, LossModel(3.0, 0.88, 0.0), rng)
    assert n.mean() == pytest.approx(0.88 * math.exp(-0.012 / 3), abs=0.01)
    assert np.all((at >= 0) & (at <= DET.probe_time_s))


def test_ideal_preselection():
    loss = LossModel(3.0, 1.0, math.inf)
    r = preselection_experiment(1.0, DET, loss, trials=20000, seed=1)
    assert r.conditional(1, 2) == 0.0 and r.joint[1, 3:].sum() == 0
    assert r.retention == pytest.approx(math.exp(-DET.probe_time_s / 3.0), abs=0.005)


def test_default_preselection():
    r = preselection_experiment(1.0, DET, LossModel(), trials=20000, seed=2)
    assert r.retention == pytest.approx(0.85, abs=0.05)
    assert r.joint.sum() == 20000
    # pairs rarely survive a probe; heavier loading gives some first >= 2 events
    heavy = preselection_experiment(3.0, DET, LossModel(), trials=20000, seed=2)
    assert heavy.joint[2:].sum() > 0
    assert heavy.conditional_at_least(2) < 0.5 * heavy.retention


def test_preselection_threads_and_precondition():
    a = preselection_experiment(1.0, DET, LossModel(), trials=10000, seed=3, threads=1)
    b = preselection_experiment(1.0, DET, LossModel(), trials=10000, seed=3, threads=4)
    np.testing.assert_array_equal(a.joint, b.joint)
    with pytest.raises(ValueError):
        preselection_experiment(1.0, DET, LossModel(), trials=999)


def test_loss_model_validation():
    for bad in [dict(lifetime_s=0), dict(probe_survival=1.2), dict(pair_rate_per_s=-1)]:
        with pytest.raises(ValueError):
            LossModel(**bad)


# ---------------------------------------------------------------- drop and recapture


def test_sampled_atoms_bound_and_thermal():
    pos, vel = sample_trapped(TRAP, 0.5e-3, 50000, np.random.default_rng(0))
    e = 0.5 * TRAP.mass_kg * np.sum(vel**2, axis=1) + TRAP.potential(*pos.T)
    assert np.all(e < 0) and len(pos) > 45000
    assert vel[:, 0].std() == pytest.approx(math.sqrt(KB * 0.5e-3 / TRAP.mass_kg), rel=0.03)


def test_recapture_monotone_grid():
    t = np.array([0.0, 0.1e-3, 0.5e-3, 1e-3, 2e-3])
    n = 40000
    curves = np.array([drop_recapture(TRAP, T, t, trials=n, seed=4) for T in (0.25e-3, 0.5e-3, 1e-3)])
    assert np.all(curves[:, 0] == 1.0)
    sig = 3 * np.sqrt(2 * curves * (1 - curves) / n) + 1e-12
    assert np.all(np.diff(curves, axis=1) <= sig[:, 1:])
    assert np.all(np.diff(curves, axis=0) <= sig[1:])
    assert np.all(curves[2, 1:] < curves[1, 1:])
    assert np.all((curves >= 0) & (curves <= 1))


def test_recapture_errors():
    with pytest.raises(ValueError):
        drop_recapture(TRAP, 0.0, [1e-3])
    with pytest.raises(ValueError):
        drop_recapture(TRAP, 1e-3, [-1e-3])


def test_temperature_round_trip_and_ordering():
    t = np.array([5.0, 10, 15, 20, 30, 40, 50]) * 1e-6
    est = {}
    for T, seed in ((1e-3, 10), (0.5e-3, 11)):
        data = drop_recapture(TRAP, T, t, trials=10_000, seed=seed)
        est[T] = estimate_temperature(t, data, TRAP, n_sim=20000, seed=1, data_trials=10_000, n_boot=20)
    assert est[1e-3].temperature_k == pytest.approx(1e-3, rel=0.2)
    assert est[0.5e-3].temperature_k < est[1e-3].temperature_k
    for T, e in est.items():
        assert e.ci_low_k <= e.temperature_k <= e.ci_high_k
        assert e.ci_low_k <= T <= e.ci_high_k


def test_temperature_degenerate():
    t = np.array([0.0, 1e-9, 2e-9, 3e-9])
    with pytest.raises(DegenerateFitError):
        estimate_temperature(t, np.ones(4), TRAP, n_sim=2000, n_boot=5)
    with pytest.raises(ValueError):
        estimate_temperature(t[:3], np.ones(3), TRAP)
