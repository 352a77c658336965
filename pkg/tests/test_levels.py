import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydflop.constants import load_constants, reduced_rydberg_hz
from rydflop.levels import (
    ForsterChannel,
    MissingSeriesError,
    QuantumDefectModel,
    RydbergLevel,
    SelectionRuleError,
    ZeemanStatePair,
    dipole_scale_estimate,
    forster_defect,
    lande_gj,
    level_energy,
    parse_level,
    radial_matrix_element,
    zeeman_resonance_shift,
)

import oracles

QD = QuantumDefectModel.rubidium()
D52 = parse_level("43d5/2")


def chan(f1, f2, init="43d5/2"):
    i = parse_level(init)
    return ForsterChannel((i, i), (parse_level(f1), parse_level(f2)))


# ---------------------------------------------------------------- types


def test_level_validation():
    assert RydbergLevel(43, 2, 2.5).series == "d5/2"
    assert str(parse_level("41f7/2")) == "41f7/2"
    for bad in [(43, 2, 0.5), (5, 5, 4.5), (0, 0, 0.5), (5, 0, 1.5)]:
        with pytest.raises(ValueError):
            RydbergLevel(*bad)


def test_defect_ordering_and_convergence():
    d0 = {s: QD.series[s][0] for s in QD.series}
    assert d0["s1/2"] > d0["p3/2"] > d0["d5/2"] > d0["f5/2"] > 0
    for l, j in [(0, 0.5), (1, 1.5), (2, 2.5), (3, 3.5)]:
        dev = [abs(QD.defect(n, l, j) - QD.coefficients(l, j)[0]) for n in range(10, 80)]
        assert np.all(np.diff(dev) < 0)
        ns = QD.n_star(RydbergLevel(43, l, j))
        assert 0 < ns < 43


# ---------------------------------------------------------------- energies


def test_hydrogenic_limit():
    ry = reduced_rydberg_hz()
    h = QuantumDefectModel.hydrogenic(ry)
    assert level_energy(RydbergLevel(2, 1, 0.5), h) == pytest.approx(-ry / 4, rel=1e-15)


def test_43d_energy_against_mpmath():
    d0, d2 = QD.series["d5/2"]
    ns_mp, u_mp = oracles.mp_level_energy(43, d0, d2, QD.rydberg_hz)
    assert QD.n_star(D52) == pytest.approx(float(ns_mp), rel=1e-14)
    assert level_energy(D52, QD) == pytest.approx(float(u_mp), rel=1e-13)
    # >= 10 significant digits of n*
    assert f"{QD.n_star(D52):.10g}" == f"{float(ns_mp):.10g}"


def test_mass_corrected_rydberg():
    c = load_constants()
    assert reduced_rydberg_hz() == pytest.approx(
        c["rydberg_constant_inf_hz"] * c["mass_u"] / (c["mass_u"] + c["electron_mass_u"]), rel=1e-15
    )


def test_energy_increases_to_zero():
    for l, j in [(0, 0.5), (2, 2.5), (3, 3.5)]:
        u = np.array([level_energy(RydbergLevel(n, l, j), QD) for n in range(5, 400)])
        assert np.all(np.diff(u) > 0) and np.all(u < 0)
        assert u[-1] > -5e-4 * abs(u[0])


def test_missing_series():
    qd = QuantumDefectModel({"s1/2": (3.13, 0.18)}, QD.rydberg_hz)
    with pytest.raises(MissingSeriesError, match="d5/2"):
        level_energy(D52, qd)


# ---------------------------------------------------------------- Foerster defects


def test_forster_defects_match_published():
    f5 = forster_defect(chan("45p3/2", "41f5/2"), QD)
    f7 = forster_defect(chan("45p3/2", "41f7/2"), QD)
    assert f5 / 1e6 == pytest.approx(-6.0, abs=0.5)
    assert f7 / 1e6 == pytest.approx(-8.3, abs=0.5)


def test_forster_defect_definition_and_mpmath():
    ch = chan("45p3/2", "41f5/2")
    parts = []
    for lv in (*ch.final, *ch.initial):
        d0, d2 = QD.coefficients(lv.l, lv.j)
        parts.append(oracles.mp_level_energy(lv.n, d0, d2, QD.rydberg_hz)[1])
    expect = float(parts[0] + parts[1] - parts[2] - parts[3])
    assert forster_defect(ch, QD) == pytest.approx(expect, rel=1e-8)


def test_elastic_channel_is_zero():
    assert forster_defect(ForsterChannel((D52, D52), (D52, D52)), QD) == 0.0


@pytest.mark.parametrize("final", [("45p3/2", "41f5/2"), ("45p3/2", "41f7/2"), ("44p3/2", "42f7/2")])
def test_forster_antisymmetry(final):
    ch = chan(*final)
    assert forster_defect(ch.reversed(), QD) == -forster_defect(ch, QD)


def test_selection_rule_rejected():
    with pytest.raises(SelectionRuleError, match="43d5/2"):
        chan("45s1/2", "41f5/2")
    with pytest.raises(SelectionRuleError):
        chan("45p1/2", "41f7/2")  # d5/2 -> p1/2 has |dj| = 2


# ---------------------------------------------------------------- Zeeman


def test_lande_d52_exact():
    assert lande_gj(2, 2.5) == 1.2
    assert lande_gj(0, 0.5) == 2.0


def test_zeeman_shift_value():
    pair = ZeemanStatePair(2, 2, 0.5, 2, 2.5, 0.5, 1e-3)
    assert zeeman_resonance_shift(pair) / 1e6 == pytest.approx(-5.6, rel=1e-2)


def test_zeeman_trivial_cases():
    assert zeeman_resonance_shift(ZeemanStatePair(2, 2, 0.5, 2, 2.5, 0.5, 0.0)) == 0.0
    assert zeeman_resonance_shift(ZeemanStatePair(2, 0, 0.5, 2, 2.5, 0.5, 1e-3)) != 0.0
    # m_f = 0 with an integer-j stand-in for m_j = 0
    assert zeeman_resonance_shift(ZeemanStatePair(2, 0, 0.5, 1, 0.5, 0.5, 1e-3, g_j=0.0)) == 0.0


def test_zeeman_precondition():
    with pytest.raises(ValueError):
        ZeemanStatePair(1, 2, 0.5, 2, 2.5, 0.5, 1e-3)
    with pytest.raises(ValueError):
        ZeemanStatePair(2, 2, 0.5, 2, 2.5, 3.5, 1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e-2, 1e-2), st.floats(-1e-2, 1e-2))
def test_zeeman_linear_in_b(b1, b2):
    f = lambda b: zeeman_resonance_shift(ZeemanStatePair(2, 2, 0.5, 2, 2.5, 0.5, b))
    assert f(b1 + b2) == pytest.approx(f(b1) + f(b2), abs=1e-6)
    assert f(3 * b1) == pytest.approx(3 * f(b1), abs=1e-6)


# ---------------------------------------------------------------- dipole scales


def test_dipole_scale_estimate():
    assert dipole_scale_estimate(43) == pytest.approx(41.65**2, rel=2e-3)
    assert dipole_scale_estimate(1, QuantumDefectModel.hydrogenic(1.0)) == 1.0
    assert dipole_scale_estimate(44) > dipole_scale_estimate(43)


def test_radial_elements_against_numerov():
    for other in ("45p3/2", "41f5/2", "41f7/2"):
        b = parse_level(other)
        semi = radial_matrix_element(D52, b, QD)
        num = oracles.numerov_matrix_element(QD.n_star(D52), 2, QD.n_star(b), b.l)
        assert 850 < semi < 3400  # within a factor of 2 of 1700 a0
        assert semi == pytest.approx(num, rel=0.1)


def test_radial_element_hydrogen():
    h = QuantumDefectModel.hydrogenic(1.0, lmax=12)
    for n, l in [(20, 5), (30, 10), (25, 3)]:
        a, b = RydbergLevel(n, l, l + 0.5), RydbergLevel(n, l + 1, l + 1.5)
        semi = radial_matrix_element(a, b, h)
        exact = abs(oracles.hydrogen_matrix_element(n, l, n, l + 1))
        assert semi == pytest.approx(exact, rel=0.1)


def test_radial_element_selection_rule():
    with pytest.raises(SelectionRuleError):
        radial_matrix_element(D52, parse_level("43s1/2"), QD)
