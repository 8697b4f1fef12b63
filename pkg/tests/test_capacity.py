import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from capa import (
    DomainError,
    LinkBudget,
    SicOrder,
    TwoUserChannel,
    UsageError,
    Wave,
    asymptotic_sum_rate,
    capacity_region,
    gamma2_sic,
    lambda_star,
    rates_for_order,
    single_user_capacity,
    sum_rate_capacity,
    sum_rate_upper_bound,
)
from capa.capacity import gamma2_sic_simplified, naive_mrc_sinr, whitening_quadratic

snr = st.floats(1e-2, 1e6)
gain = st.floats(1e-6, 0.5)


@st.composite
def channels(draw):
    a1, a2 = draw(gain), draw(gain)
    frac = draw(st.floats(0.0, 1.0))
    phase = draw(st.floats(0.0, 2 * math.pi))
    return TwoUserChannel(a1, a2, frac * math.sqrt(a1 * a2) * complex(math.cos(phase), math.sin(phase)))


def lb(x):
    return LinkBudget(x)


def test_db_conversion():
    assert LinkBudget.from_db(30).gamma_bar == pytest.approx(1e3)
    assert LinkBudget(1e4).db == pytest.approx(40.0)
    with pytest.raises(UsageError):
        LinkBudget(-1.0)


def test_physical_budget_matches_group():
    w = Wave(0.0107)
    got = LinkBudget.from_physical(2.0, 1e-5, w, 3.0).gamma_bar
    assert got == pytest.approx((2.0 * 1e-5 * w.k0 * w.eta) ** 2 / (4 * math.pi * 3.0), rel=1e-14)


@pytest.mark.parametrize("g, a, expected", [(1.0, 1.0, 1.0), (1e3, 0.0, 0.0), (1e3, 1 / 6, 7.389452)])
def test_single_user_capacity(g, a, expected):
    assert single_user_capacity(lb(g), a) == pytest.approx(expected, abs=1e-6)


def test_lambda_star_silent_interferer():
    plus, minus = lambda_star(0.0, 0.25)
    assert plus == 0.0 and minus == pytest.approx(-8.0)


def test_lambda_star_reference_value():
    plus, _ = lambda_star(1e3, 0.1)
    assert plus == pytest.approx(-10 + 10 / math.sqrt(101), rel=1e-14)
    assert plus == pytest.approx(-9.00496, abs=1e-5)


def test_lambda_star_rejects_zero_gain():
    with pytest.raises(DomainError):
        lambda_star(1.0, 0.0)


@given(g=snr, a=gain)
def test_lambda_star_matches_polynomial_roots(g, a):
    # (a + g a^2) l^2 + 2 (1 + g a) l + g = 0
    ref = sorted(np.roots([a + g * a * a, 2 * (1 + g * a), g]).real)
    plus, minus = lambda_star(g, a)
    assert minus == pytest.approx(ref[0], rel=1e-9)
    assert plus == pytest.approx(ref[1], rel=1e-6, abs=1e-12 / a)
    assert -1 / a < plus <= 0
    scale = 1 + g * (1 + abs(minus) * a) ** 2
    assert abs(whitening_quadratic(minus, g, a)) <= 1e-9 * scale


def test_no_interference_gamma2():
    ch = TwoUserChannel(0.1, 0.2, 0.0)
    lam = lambda_star(1e3, 0.1)[0]
    assert gamma2_sic(lb(1e4), ch, lam) == pytest.approx(1e4 * 0.2)


@given(g1=snr, g2=snr, ch=channels())
def test_gamma2_root_insensitive_and_penalised(g1, g2, ch):
    plus, minus = lambda_star(g1, ch.a1)
    gp, gm = gamma2_sic(lb(g2), ch, plus), gamma2_sic(lb(g2), ch, minus)
    ref = g2 * ch.a2
    assert abs(gp - gm) <= 1e-10 * ref
    assert gp <= ref * (1 + 1e-12)
    assert gp == pytest.approx(gamma2_sic_simplified(lb(g1), lb(g2), ch), rel=1e-8, abs=1e-10 * ref)


@given(g1=snr, g2=snr, ch=channels())
def test_interference_penalty_strict_when_correlated(g1, g2, ch):
    assume(ch.abs_rho2 > 1e-6 * ch.a1 * ch.a2)
    assert gamma2_sic_simplified(lb(g1), lb(g2), ch) < g2 * ch.a2


def test_rates_without_interference():
    ch = TwoUserChannel(0.1, 0.3, 0.0)
    for order in SicOrder:
        p = rates_for_order(lb(10), lb(20), ch, order)
        assert (p.r1, p.r2) == pytest.approx((math.log2(2), math.log2(7)))


def test_coincident_users_rate():
    a1, a2 = 0.1, 0.2
    ch = TwoUserChannel(a1, a2, math.sqrt(a1 * a2))
    p = rates_for_order(lb(30), lb(50), ch, SicOrder.TWO_THEN_ONE)
    assert p.r2 == pytest.approx(math.log2(1 + 50 * a2 / (1 + 30 * a1)), rel=1e-12)


def test_sum_rate_extremes():
    g1, g2, a1, a2 = 1e3, 1e4, 0.01, 0.02
    free = TwoUserChannel(a1, a2, 0.0)
    full = TwoUserChannel(a1, a2, math.sqrt(a1 * a2))
    assert sum_rate_capacity(lb(g1), lb(g2), free) == pytest.approx(math.log2((1 + g1 * a1) * (1 + g2 * a2)))
    assert sum_rate_capacity(lb(g1), lb(g2), free) == pytest.approx(sum_rate_upper_bound(lb(g1), lb(g2), free))
    assert sum_rate_capacity(lb(g1), lb(g2), full) == pytest.approx(math.log2(1 + g1 * a1 + g2 * a2))


def test_sum_rate_rejects_inconsistent_statistics():
    ch = TwoUserChannel(0.1, 0.1, 0.1)
    bad = TwoUserChannel.__new__(TwoUserChannel)
    object.__setattr__(bad, "a1", 0.1)
    object.__setattr__(bad, "a2", 0.1)
    object.__setattr__(bad, "rho", 0.11)
    assert sum_rate_capacity(lb(1), lb(1), ch) > 0
    with pytest.raises(DomainError):
        sum_rate_capacity(lb(1), lb(1), bad)


@given(g1=snr, g2=snr, ch=channels())
def test_order_invariance_and_bound(g1, g2, ch):
    s21 = rates_for_order(lb(g1), lb(g2), ch, SicOrder.TWO_THEN_ONE).total
    s12 = rates_for_order(lb(g1), lb(g2), ch, SicOrder.ONE_THEN_TWO).total
    c = sum_rate_capacity(lb(g1), lb(g2), ch)
    assert abs(s21 - s12) <= 1e-9
    assert abs(s21 - c) <= 1e-9
    assert c <= sum_rate_upper_bound(lb(g1), lb(g2), ch) + 1e-12


@given(g1=snr, g2=snr, a1=gain, a2=gain, f1=st.floats(0, 1), f2=st.floats(0, 1))
def test_sum_rate_nonincreasing_in_correlation(g1, g2, a1, a2, f1, f2):
    lo, hi = sorted((f1, f2))
    base = math.sqrt(a1 * a2)
    c_lo = sum_rate_capacity(lb(g1), lb(g2), TwoUserChannel(a1, a2, lo * base))
    c_hi = sum_rate_capacity(lb(g1), lb(g2), TwoUserChannel(a1, a2, hi * base))
    assert c_hi <= c_lo + 1e-12


@given(g1=snr, g2=snr, ch=channels(), c=st.floats(1e-3, 1e3))
def test_sum_rate_depends_on_dimensionless_groups(g1, g2, ch, c):
    scaled = TwoUserChannel(c * ch.a1, c * ch.a2, c * ch.rho)
    assert sum_rate_capacity(lb(g1 / c), lb(g2 / c), scaled) == pytest.approx(
        sum_rate_capacity(lb(g1), lb(g2), ch), rel=1e-10, abs=1e-12
    )


def test_asymptotic_sum_rate():
    assert asymptotic_sum_rate(2, 2) == pytest.approx(2.0)
    assert asymptotic_sum_rate(1e3, 1e4) == pytest.approx(math.log2(501) + math.log2(5001), rel=1e-14)
    assert asymptotic_sum_rate(1e3, 1e4) == pytest.approx(21.256, abs=1e-3)
    assert asymptotic_sum_rate(5, 7, 1.0) > asymptotic_sum_rate(5, 7, 0.9)
    with pytest.raises(DomainError):
        asymptotic_sum_rate(1, 1, 0.0)


def test_region_is_rectangle_without_correlation():
    reg = capacity_region(lb(10), lb(20), TwoUserChannel(0.1, 0.1, 0.0))
    assert reg.cut_length == 0.0
    assert (reg.corner_21.r1, reg.corner_21.r2) == pytest.approx((reg.c1_max, reg.c2_max))


def test_region_corners_for_coincident_unit_snr_users():
    ch = TwoUserChannel(0.5, 0.5, 0.5)
    reg = capacity_region(lb(2), lb(2), ch)
    assert (reg.corner_21.r1, reg.corner_21.r2) == pytest.approx((1.0, math.log2(3) - 1), rel=1e-12)
    assert (reg.corner_12.r1, reg.corner_12.r2) == pytest.approx((math.log2(3) - 1, 1.0), rel=1e-12)
    assert reg.sum_capacity == pytest.approx(math.log2(3), rel=1e-12)


@given(g1=snr, g2=snr, ch=channels())
def test_region_geometry(g1, g2, ch):
    reg = capacity_region(lb(g1), lb(g2), ch)
    assert reg.corner_21.total == pytest.approx(reg.corner_12.total, abs=1e-9)
    for r1, r2 in reg.segment(5):
        assert reg.contains(r1, r2, tol=1e-9)
    assert not reg.contains(reg.c1_max, reg.c2_max + 1.0)


def test_segment_needs_two_points():
    reg = capacity_region(lb(1), lb(1), TwoUserChannel(0.1, 0.1, 0.05))
    with pytest.raises(UsageError):
        reg.segment(1)


def test_naive_mrc_never_beats_whitening():
    ch = TwoUserChannel(0.02, 0.03, 0.015)
    assert naive_mrc_sinr(lb(1e3), lb(1e4), ch) <= gamma2_sic_simplified(lb(1e3), lb(1e4), ch)
