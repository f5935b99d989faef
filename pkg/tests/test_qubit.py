import numpy as np
import pytest
from hypothesis import given, strategies as st

from measfid.core import OutOfRange
from measfid.haar import BlochQuadrature, bloch_states
from measfid.qubit import (
    CSV_COLUMNS,
    CoherentQubitPovm,
    delta_term,
    exact_fidelity,
    fg_gap,
    gamma_grid,
    measure_bound,
    measure_bounds,
    region_envelope,
    region_membership,
    rows_to_csv,
    sufficient_condition,
    sweep_table1,
    violation_scan,
    PVM_Z,
)

fractions = st.floats(0.05, 1.0)
u0s = st.floats(0.5, 0.999)


def closed_measure_bound(povm, j):
    # integrand cos(2 arccot(x)) = (x^2 - 1)/(x^2 + 1) integrates in closed form
    t = np.real(povm.effects[0][1, 1] if j == 0 else povm.effects[1][0, 0])
    a = t / (2 * povm.gamma_abs)
    return 0.5 * (1 - a / np.sqrt(1 + a * a))


def test_family_validation():
    with pytest.raises(OutOfRange):
        CoherentQubitPovm(0.9, 0.5)
    with pytest.raises(OutOfRange):
        CoherentQubitPovm(0.3)
    m = CoherentQubitPovm.at_fraction(0.9, 1.0)
    assert m.gamma_abs == pytest.approx(m.r_max)
    assert m.povm.min_eig == pytest.approx(0.0, abs=1e-12)


@given(u0s, fractions)
def test_measure_bound_closed_form(u0, frac):
    m = CoherentQubitPovm.at_fraction(u0, frac)
    for j in (0, 1):
        assert measure_bound(m, j) == pytest.approx(closed_measure_bound(m, j), abs=1e-10)


@given(u0s, fractions, st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_region_inside_envelope(u0, frac, theta, phi):
    m = CoherentQubitPovm.at_fraction(u0, frac)
    for j in (0, 1):
        if region_membership(m, j, theta, phi):
            assert region_envelope(m, j, theta, phi)


@given(u0s, fractions, st.floats(0, 2 * np.pi))
def test_phase_rotation_preserves_measures(u0, frac, phase):
    a = measure_bounds(CoherentQubitPovm.at_fraction(u0, frac, phase), BlochQuadrature(64, 64))
    b = measure_bounds(CoherentQubitPovm.at_fraction(u0, frac), BlochQuadrature(64, 64))
    assert a.mu_A0_bound == pytest.approx(b.mu_A0_bound, abs=1e-14)
    assert a.phase_rotation == pytest.approx(np.angle(np.exp(1j * phase)) if frac else 0.0, abs=1e-9)


def test_phase_does_not_change_fidelity():
    a = exact_fidelity(CoherentQubitPovm.at_fraction(0.95, 0.7, 1.3)).value
    b = exact_fidelity(CoherentQubitPovm.at_fraction(0.95, 0.7)).value
    assert a == pytest.approx(b, abs=1e-8)


def test_masked_measure_below_bound():
    for frac in (0.3, 0.7, 1.0):
        rep = measure_bounds(CoherentQubitPovm.at_fraction(0.9, frac), BlochQuadrature(256, 256))
        assert rep.mu_A0_exact <= rep.mu_A0_bound + 2e-3
        assert rep.mu_A1_exact <= rep.mu_A1_bound + 2e-3


def test_no_coherence_has_empty_regions():
    rep = sufficient_condition(CoherentQubitPovm(0.9), BlochQuadrature(64, 64))
    assert rep.mu_A0_bound == rep.mu_A0_exact == 0.0
    assert rep.delta0 == rep.delta1 == 0.0
    assert rep.sufficient_ok


def test_delta_term_closed_form_at_large_a():
    # integrand ~ cos^4 phi / a^4 for a >> 1, whose half-range integral is 3 pi / 8
    m = CoherentQubitPovm(0.6, 1e-4)
    a = (1 - 0.6) / (2e-4)
    expected = np.sqrt(0.6 * 0.6) / (2 * np.pi) * 3 * np.pi / 8 / a**4
    assert delta_term(m, 0) == pytest.approx(expected, rel=1e-5)


def test_fg_gap_integral_equals_fidelity_minus_bound():
    # F = first sum + 2 * integral of f_01, and f_01 = gap + g_01
    m = CoherentQubitPovm.at_fraction(0.9, 0.5)
    th, ph, w = BlochQuadrature(256, 256).grid()
    gap = np.sum(w * fg_gap(PVM_Z, m.povm, 0, 1, bloch_states(th, ph)))
    f = exact_fidelity(m).value
    p0 = np.cos(th / 2) ** 2
    r0 = np.clip(0.9 * p0 + 0.1 * (1 - p0) + 0.5 * m.r_max * np.cos(ph) * np.sin(th), 0, 1)
    first = np.sum(w * (p0 * r0 + (1 - p0) * (1 - r0)))
    g_exact = np.sqrt(0.9 * 0.9) / 6  # integral of p0 p1 over Haar states is 1/6
    assert f == pytest.approx(first + 2 * (gap + g_exact), abs=1e-8)


def test_sweep_endpoints_and_csv():
    rows = sweep_table1(None, (0.99,), 4)
    assert rows[0].gamma_abs == 0.0
    assert rows[-1].gamma_abs == pytest.approx(np.sqrt(0.99 * 0.01))
    assert rows[0].lb == pytest.approx((1 + 2 * 0.99) / 3, abs=1e-15)
    assert rows[0].F_exact == pytest.approx(0.9998198742856025, abs=1e-9)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 5


def test_sweep_thread_independent():
    a = rows_to_csv(sweep_table1(None, (0.995,), 5))
    b = rows_to_csv(sweep_table1(None, (0.995,), 5, threads=3))
    assert a == b


def test_gamma_grid():
    g = gamma_grid(0.9, 11)
    assert g[0] == 0 and g[-1] == pytest.approx(0.3)


def test_small_scan_has_no_violations():
    res = violation_scan(np.array([0.5, 0.75, 0.95]), 5)
    assert res.violations == []
    assert res.max_negative_gap < 0
