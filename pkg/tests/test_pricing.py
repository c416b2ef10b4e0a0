"""Bid candidates, the downshift gate, urgencies, comparables and list prices."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from housingabm.pricing import (
    bid_candidates,
    buyer_urgency,
    comparable_quality,
    comparable_quality_bulk,
    decide_bid,
    list_price,
    seller_urgency,
)


def _candidates(**overrides):
    kwargs = dict(
        income=8000.0,
        wealth=100000.0,
        urgency=1.0,
        bid_factor=1.0,
        downpayment_wealth=0.9,
        loan_value=0.9,
        debt_income=0.4,
        approval_rate=0.07,
        mortgage_income_coeff=3.0,
        mortgage_income_exponent=0.8,
        lvr_mean=0.6,
        mortgage_rate=0.05,
        owning_expense_rate=0.042,
        aptitude=0.0,
        delta_hpi=0.0,
    )
    kwargs.update(overrides)
    return bid_candidates(**kwargs)


def test_p2_oracle():
    _, p2, _, _ = _candidates(wealth=100000.0, downpayment_wealth=0.9, loan_value=0.9)
    assert p2 == pytest.approx(900_000.0, rel=1e-12)


def test_p3_oracle():
    _, _, p3, _ = _candidates(income=8000.0, debt_income=0.4, loan_value=0.9,
                              approval_rate=0.07)
    assert p3 == pytest.approx(609_523.8095238095, rel=1e-12)


def test_p1_independent_of_trend_when_h_zero():
    p1_a, *_ = _candidates(aptitude=0.0, delta_hpi=0.0)
    p1_b, *_ = _candidates(aptitude=0.0, delta_hpi=0.3)
    assert p1_a == p1_b


def test_p1_monotone_in_trend():
    base, *_ = _candidates(aptitude=0.5, delta_hpi=0.0)
    up, *_ = _candidates(aptitude=0.5, delta_hpi=0.05)
    down, *_ = _candidates(aptitude=0.5, delta_hpi=-0.05)
    assert up > base > down


def test_denominator_clamp_flagged():
    # 0.6*0.05 + 0.042 = 0.072; h*delta = 0.1 drives the denominator negative.
    p1, _, _, clamped = _candidates(aptitude=1.0, delta_hpi=0.1)
    assert clamped
    ref, *_ = _candidates(aptitude=0.0, delta_hpi=0.0)
    assert p1 == pytest.approx(ref * (0.6 * 0.05 + 0.042) / 0.005)


def test_decide_bid_gate_examples():
    bid, will = decide_bid(1_000_000.0, 500_000.0, 700_000.0, 0.6)
    assert bid == 500_000.0 and not will
    bid, will = decide_bid(800_000.0, 800_000.0, 800_000.0, 0.6)
    assert bid == 800_000.0 and will


def test_decide_bid_zero_wealth_blocks():
    p1, p2, p3, _ = _candidates(wealth=0.0)
    assert p2 == 0.0
    _, will = decide_bid(p1, p2, p3, 0.6)
    assert not will


def test_decide_bid_eligibility_mask():
    _, will = decide_bid(
        np.array([1e6, 1e6]), np.array([1e6, 1e6]), np.array([1e6, 1e6]),
        0.6, eligible=np.array([True, False]),
    )
    assert list(will) == [True, False]


@given(st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=25)
def test_bid_scaling_property(c):
    p1, p2, p3 = 700_000.0, 900_000.0, 650_000.0
    bid, _ = decide_bid(p1, p2, p3, 0.6)
    scaled, _ = decide_bid(c * p1, c * p2, c * p3, 0.6)
    assert scaled == pytest.approx(c * bid, rel=1e-12)
    assert bid == min(p1, p2, p3)


def test_buyer_urgency_window():
    assert buyer_urgency(-1, 1.2, 6) == 1.0  # never sold
    assert buyer_urgency(3, 1.2, 6) == 1.2
    assert buyer_urgency(7, 1.2, 6) == 1.0


def test_seller_urgency_cases():
    assert seller_urgency(50_000.0, False, 0.9) == 1.0
    assert seller_urgency(50_000.0, True, 0.9) == 0.9
    assert seller_urgency(-5_000.0, False, 0.9) == 0.9


def _brute_force_comparable(house, qualities, k=10):
    qualities = np.asarray(qualities, dtype=float)
    others = [i for i in range(qualities.size) if i != house]
    others.sort(key=lambda i: (abs(qualities[i] - qualities[house]), i))
    chosen = others[:k]
    return float(np.mean(qualities[chosen])) if chosen else float(qualities[house])


def test_comparable_identical_qualities():
    qualities = np.full(40, 333_000.0)
    assert comparable_quality(5, qualities) == 333_000.0


def test_comparable_eleven_houses():
    qualities = np.arange(11, dtype=float) * 100.0 + 1000.0
    expected = np.delete(qualities, 4).mean()
    assert comparable_quality(4, qualities) == pytest.approx(expected)


def test_comparable_arithmetic_grid_matches_brute_force():
    qualities = 100.0 + 10.0 * np.arange(50, dtype=float)
    for house in (0, 7, 25, 49):
        assert comparable_quality(house, qualities) == pytest.approx(
            _brute_force_comparable(house, qualities)
        )


def test_comparable_matches_brute_force_random():
    rng = np.random.default_rng(11)
    for trial in range(120):
        n = int(rng.integers(2, 60))
        if trial % 3 == 0:
            qualities = rng.integers(1, 8, size=n).astype(float)  # heavy ties
        else:
            qualities = rng.lognormal(13.0, 0.4, size=n)
        for house in rng.integers(0, n, size=min(n, 5)):
            assert comparable_quality(int(house), qualities) == pytest.approx(
                _brute_force_comparable(int(house), qualities), rel=1e-12
            )


def test_comparable_bulk_matches_scalar():
    rng = np.random.default_rng(12)
    for trial in range(60):
        n = int(rng.integers(1, 200))
        if trial % 2:
            qualities = rng.integers(1, 12, size=n).astype(float)
        else:
            qualities = rng.lognormal(13.0, 0.5, size=n)
        houses = rng.integers(0, n, size=min(n, 20))
        bulk = comparable_quality_bulk(houses, qualities)
        for j, house in enumerate(houses):
            assert bulk[j] == pytest.approx(
                comparable_quality(int(house), qualities), rel=1e-9
            )


def test_list_price_oracle():
    assert list_price(500_000.0, 1.0, 1.0, 0, 1.70, 0.5, 0.01) == pytest.approx(850_000.0)


def test_list_price_neutral_stats():
    assert list_price(500_000.0, 1.3, 0.9, 0, 1.70, 0.0, 0.01) == pytest.approx(
        1.70 * 500_000.0 * 0.9
    )


def test_list_price_time_on_market_discount():
    fresh = list_price(500_000.0, 1.0, 1.0, 0, 1.70, 0.5, 0.01)
    stale = list_price(500_000.0, 1.0, 1.0, 12, 1.70, 0.5, 0.01)
    assert stale / fresh == pytest.approx(13.0 ** -0.01)


@given(
    st.floats(min_value=0.5, max_value=2.0),
    st.floats(min_value=0.5, max_value=2.0),
    st.integers(min_value=0, max_value=24),
)
@settings(max_examples=50)
def test_list_price_monotonicity(s_lo, s_hi, months):
    s_lo, s_hi = sorted((s_lo, s_hi))
    lo = list_price(500_000.0, s_lo, 1.0, months, 1.70, 0.5, 0.01)
    hi = list_price(500_000.0, s_hi, 1.0, months, 1.70, 0.5, 0.01)
    assert hi >= lo  # nondecreasing in the sold-to-list ratio
    later = list_price(500_000.0, s_lo, 1.0, months + 1, 1.70, 0.5, 0.01)
    assert later <= lo  # nonincreasing in time on market
