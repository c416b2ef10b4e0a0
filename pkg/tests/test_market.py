"""Bid/listing collection and one-pass clearing with highest-price preference."""

import dataclasses

import numpy as np
import pytest

from conftest import flat_series, toy_config
from housingabm.config import MonthlySeries
from housingabm.fiscal import DEVELOPER, NOBODY, OVERSEAS
from housingabm.market import (
    MarketStats,
    clear,
    collect_bids,
    collect_listings,
    match_greedy,
)
from housingabm.population import synthesize_population


def _brute_force_match(list_prices, bid_prices, sellers, bidders):
    """Independent clearing oracle: walk listings in descending price order,
    each taking the highest unconsumed bid at or above its price (price ties
    by seller id on listings, bidder id then submission order on bids)."""
    listings = sorted(range(len(list_prices)),
                      key=lambda i: (-list_prices[i], sellers[i]))
    available = sorted(range(len(bid_prices)),
                       key=lambda j: (-bid_prices[j], bidders[j], j))
    consumed = set()
    deals = []
    for li in listings:
        for j in available:
            if j in consumed or bidders[j] == sellers[li]:
                continue
            if bid_prices[j] >= list_prices[li]:
                consumed.add(j)
                deals.append((li, j))
            # Best bid below the list price: the listing carries, the bid stays.
            break
    return deals


def test_match_single_listing_highest_bid():
    deals = match_greedy([500_000.0], [490_000.0, 520_000.0], [10], [1, 2])
    assert deals == [(0, 1)]  # the 520k bid wins


def test_match_no_affordable_bid():
    deals = match_greedy([600_000.0, 550_000.0], [400_000.0], [10, 11], [1])
    assert deals == []


def test_match_two_listings_two_bids():
    deals = match_greedy([600_000.0, 550_000.0], [650_000.0, 560_000.0],
                         [10, 11], [1, 2])
    assert sorted(deals) == [(0, 0), (1, 1)]


def test_match_skips_self_purchase_without_consuming():
    # Seller 1 holds the top bid on their own listing; the bid must be
    # skipped for that listing but stay available for the cheaper one.
    deals = match_greedy([500_000.0, 400_000.0], [600_000.0, 550_000.0],
                         [1, 2], [1, 3])
    assert sorted(deals) == [(0, 1), (1, 0)]


def test_match_equals_brute_force_on_random_books():
    rng = np.random.default_rng(21)
    for _ in range(400):
        n_l = int(rng.integers(0, 13))
        n_b = int(rng.integers(0, 13))
        list_prices = rng.integers(1, 12, size=n_l).astype(float) * 1e5
        bid_prices = rng.integers(1, 12, size=n_b).astype(float) * 1e5
        sellers = rng.integers(0, 8, size=n_l)
        bidders = rng.integers(0, 8, size=n_b)
        got = match_greedy(list_prices, bid_prices, sellers, bidders)
        want = _brute_force_match(list_prices, bid_prices, sellers, bidders)
        assert sorted(got) == sorted(want)


def test_match_count_when_all_bids_clear():
    rng = np.random.default_rng(22)
    list_prices = rng.uniform(1e5, 2e5, size=6)
    bid_prices = rng.uniform(3e5, 4e5, size=9)
    deals = match_greedy(list_prices, bid_prices,
                         np.arange(100, 106), np.arange(6, 15))
    assert len(deals) == 6  # min(#bids, #listings)


def _market_world(n_households=40, n_houses=50, **overrides):
    config = toy_config(
        n_sim_households=n_households,
        initial_dwelling_count=float(n_houses),
        owner_occupier_fraction=0.6,
        investor_share=0.2,
        calendar_months=3,
        **overrides,
    )
    state = synthesize_population(config, np.random.default_rng(7))
    return config, state


def test_collect_listings_zero_probability_developer_only():
    config, state = _market_world()
    listed = collect_listings(state, config, MarketStats(), np.random.default_rng(0))
    assert np.all(state.houses.owner[listed] == DEVELOPER)
    assert listed.size == np.count_nonzero(state.houses.owner == DEVELOPER)


def test_collect_listings_binomial_rate():
    config, state = _market_world(n_households=9000, n_houses=10000)
    config = dataclasses.replace(
        config, internal=dataclasses.replace(config.internal, list_probability=0.01)
    )
    owned = np.count_nonzero(state.houses.owner >= 0)
    counts = []
    for seed in range(10):
        trial = dataclasses.replace(config)
        fresh = synthesize_population(trial, np.random.default_rng(7))
        listed = collect_listings(fresh, trial, MarketStats(), np.random.default_rng(seed))
        counts.append(np.count_nonzero(fresh.houses.owner[listed] >= 0))
    expected = 0.01 * owned
    bound = 4.0 * np.sqrt(owned * 0.01 * 0.99)
    assert abs(np.mean(counts) - expected) < bound


def test_carried_listing_ages_and_reprices():
    config, state = _market_world()
    stats = MarketStats()
    rng = np.random.default_rng(0)
    listed = collect_listings(state, config, stats, rng)
    assert np.all(state.houses.months_listed[listed] == 0)
    price_before = state.houses.list_price[listed].copy()
    # No bids: every listing carries over and ages by one month.
    log, _ = clear(state, config, listed, np.array([], dtype=np.int64),
                   np.array([]), step=0, rng=rng)
    assert len(log) == 0
    assert np.all(state.houses.months_listed[listed] == 1)
    relisted = collect_listings(state, config, stats, rng)
    assert set(listed) <= set(relisted)
    price_after = state.houses.list_price[listed]
    assert np.all(price_after < price_before)  # time-on-market discount


def test_collect_bids_overseas_shortfall():
    config, state = _market_world()
    capacity = flat_series(config.calendar_start, 12.0, config.calendar_months)
    config = dataclasses.replace(
        config,
        external=dataclasses.replace(config.external, overseas_capacity_series=capacity),
        internal=dataclasses.replace(config.internal, expectation_downshift=1.0),
    )
    stats = MarketStats(median_deal=400_000.0)
    bidders, prices, _ = collect_bids(state, config, stats, 0, np.random.default_rng(0))
    # Gate at 1.0 blocks every household (ratio <= 1): overseas bids only.
    assert np.all(bidders == OVERSEAS)
    assert bidders.size == 12  # scaled shortfall at zero holdings
    spread = config.overseas_bid_spread
    assert np.all(prices >= 400_000.0 * (1.0 - spread))
    assert np.all(prices <= 400_000.0 * (1.0 + spread))
    # Saturated capacity: no overseas bids.
    state.houses.owner[:12] = OVERSEAS
    bidders, _, _ = collect_bids(state, config, stats, 0, np.random.default_rng(0))
    assert bidders.size == 0


def test_collect_bids_portfolio_cap():
    config, state = _market_world()
    config = dataclasses.replace(config, max_portfolio=1)
    bidders, _, _ = collect_bids(state, config, MarketStats(), 0,
                                 np.random.default_rng(0))
    assert np.all(state.households.owned_count[bidders] < 1)


def test_clear_respects_single_sale_and_single_purchase():
    config, state = _market_world(n_households=60, n_houses=80)
    rng = np.random.default_rng(3)
    state.households.wealth[:] = 5e6  # everyone can settle
    state.households.income[:] = 20000.0  # bids comfortably above list prices
    stats = MarketStats()
    listings = collect_listings(state, config, stats, rng)
    bidders, prices, _ = collect_bids(state, config, stats, 0, rng)
    log, voids = clear(state, config, listings, bidders, prices, 0, rng)
    assert voids == 0
    houses_sold = list(log.house)
    assert len(houses_sold) == len(set(houses_sold))
    buyers = [b for b in log.buyer if b >= 0]
    assert len(buyers) == len(set(buyers))
    for deal, listed in zip(log.deal_price, log.list_price):
        assert deal >= listed


def test_clear_failed_coin_consumes_bid_and_carries_listing():
    config, state = _market_world()
    config = dataclasses.replace(
        config, internal=dataclasses.replace(config.internal, clearance_probability=0.0)
    )
    rng = np.random.default_rng(3)
    state.households.wealth[:] = 5e6
    state.households.income[:] = 20000.0
    stats = MarketStats()
    listings = collect_listings(state, config, stats, rng)
    bidders, prices, _ = collect_bids(state, config, stats, 0, rng)
    assert np.any(prices.max() >= state.houses.list_price[listings].min())
    log, _ = clear(state, config, listings, bidders, prices, 0, rng)
    assert len(log) == 0
    assert np.all(state.houses.months_listed[listings] == 1)


def test_clear_void_settlement_carries_listing():
    config, state = _market_world()
    rng = np.random.default_rng(3)
    state.households.wealth[:] = 1e9  # ample wealth while bids are collected
    state.households.income[:] = 20000.0
    stats = MarketStats()
    listings = collect_listings(state, config, stats, rng)
    bidders, prices, _ = collect_bids(state, config, stats, 0, rng)
    state.households.wealth[:] = 0.0  # nobody can fund a downpayment
    log, voids = clear(state, config, listings, bidders, prices, 0, rng)
    assert len(log) == 0
    assert voids > 0
    assert np.all(state.houses.months_listed[listings] == 1)
