"""Monthly market: collect bids and listings, clear with highest-price preference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .fiscal import DEVELOPER, NOBODY, OVERSEAS, settle_purchase
from .population import PopulationState, owner_occupied_mask
from . import pricing

__all__ = [
    "MarketStats",
    "TransactionLog",
    "collect_listings",
    "collect_bids",
    "match_greedy",
    "clear",
]


@dataclass
class MarketStats:
    """Observables fed back into pricing decisions."""

    sold_to_list: float = 1.0  # market average deal/list ratio, warm-up 1.0
    delta_hpi: float = 0.0  # annual index change, warm-up 0.0
    median_deal: float = 0.0  # recent median deal price (overseas bid anchor)
    recent_prices: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class TransactionLog:
    """Column arrays of one month's executed deals."""

    house: list = field(default_factory=list)
    buyer: list = field(default_factory=list)
    seller: list = field(default_factory=list)
    deal_price: list = field(default_factory=list)
    list_price: list = field(default_factory=list)
    months_on_market: list = field(default_factory=list)
    loan: list = field(default_factory=list)
    tax_paid: list = field(default_factory=list)
    discharged: list = field(default_factory=list)
    buyer_outlay: list = field(default_factory=list)
    seller_receipt: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.house)


def collect_bids(
    state: PopulationState,
    config: ScenarioConfig,
    stats: MarketStats,
    step: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, int]:
    """One bid per eligible household plus the overseas capacity shortfall.

    Returns (bidder ids, bid prices, clamp count).  Overseas bids sit at the
    recent median deal price with a small uniform spread.
    """
    hh = state.households
    env = config.external
    urgency = pricing.buyer_urgency(
        hh.months_since_sale, config.buyer_urgency, config.urgency_window_months
    )
    p1, p2, p3, clamped = pricing.bid_candidates(
        hh.income,
        hh.wealth,
        urgency,
        hh.behavior.bid_factor,
        hh.behavior.downpayment_wealth,
        hh.behavior.loan_value,
        hh.behavior.debt_income,
        hh.behavior.approval_rate,
        env.mortgage_income_coeff,
        env.mortgage_income_exponent,
        env.lvr_mean,
        env.mortgage_rate_series.at(config.series_month(step)),
        env.house_owning_expense_rate,
        config.trend_aptitude,
        stats.delta_hpi,
        config.p1_denominator_floor,
    )
    eligible = hh.owned_count < config.max_portfolio
    bid, will_bid = pricing.decide_bid(
        p1, p2, p3, config.internal.expectation_downshift, eligible
    )
    bidders = np.nonzero(will_bid)[0]
    prices = bid[bidders]

    capacity = config.external.overseas_capacity_series.at(config.series_month(step))
    shortfall = max(0, int(round(capacity / config.scale_factor)) - state.overseas_holdings)
    if shortfall > 0:
        anchor = stats.median_deal if stats.median_deal > 0 else config.initial_price_mean
        # A capacity-filling buy-to-let investor pays the going market level;
        # a small dispersion spreads its bids across the book without letting
        # it systematically outbid the households.
        factors = rng.uniform(1.0 - config.overseas_bid_spread,
                              1.0 + config.overseas_bid_spread, size=shortfall)
        bidders = np.concatenate([bidders, np.full(shortfall, OVERSEAS, dtype=np.int64)])
        prices = np.concatenate([prices, anchor * factors])

    clamp_count = int(bool(np.any(clamped)))
    return bidders, prices, clamp_count


def collect_listings(
    state: PopulationState,
    config: ScenarioConfig,
    stats: MarketStats,
    rng: np.random.Generator,
) -> np.ndarray:
    """Start new listings and reprice every active one; returns listed house ids.

    Household owners list each unlisted house with the configured monthly
    probability; the developer lists its whole inventory; overseas holdings
    are never listed within a period.
    """
    houses = state.houses
    hh = state.households
    occ = owner_occupied_mask(state)

    unlisted_owned = (~houses.listed) & (houses.owner >= 0)
    start = unlisted_owned & (rng.random(houses.n) < config.internal.list_probability)
    developer_start = (~houses.listed) & (houses.owner == DEVELOPER)
    newly = start | developer_start
    houses.listed |= newly
    houses.months_listed[newly] = 0

    active = np.nonzero(houses.listed)[0]
    if active.size == 0:
        return active

    comp = pricing.comparable_quality_bulk(active, houses.quality)
    owner = houses.owner[active]
    is_household = owner >= 0
    owner_idx = np.where(is_household, owner, 0)
    vacant_valence = ~occ[active] & (houses.tenant[active] == NOBODY)
    urgency = np.where(
        is_household,
        pricing.seller_urgency(
            hh.wealth[owner_idx], vacant_valence, config.seller_urgency
        ),
        1.0,
    )
    means = config.internal
    list_factor = np.where(is_household, hh.behavior.list_factor[owner_idx],
                           means.list_factor[0])
    s_exp = np.where(is_household, hh.behavior.sold_list_exponent[owner_idx],
                     means.sold_list_exponent[0])
    d_exp = np.where(is_household, hh.behavior.months_listed_exponent[owner_idx],
                     means.months_listed_exponent[0])
    houses.list_price[active] = pricing.list_price(
        comp, stats.sold_to_list, urgency, houses.months_listed[active],
        list_factor, s_exp, d_exp,
    )
    return active


def match_greedy(list_prices, bid_prices, sellers, bidders, attempt=None):
    """One-pass clearing: listings in descending price order each take the
    highest still-available bid at or above their price.

    Self-purchases are skipped without consuming the bid.  ``attempt(i, j)``
    is called on every match (listing index i, bid index j); it consumes the
    bid and returns True when the listing retires.  Returns a list of
    (listing index, bid index) for retired listings.
    """
    list_prices = np.asarray(list_prices, dtype=float)
    bid_prices = np.asarray(bid_prices, dtype=float)
    sellers = np.asarray(sellers)
    bidders = np.asarray(bidders)
    listing_order = np.lexsort((sellers, -list_prices))
    bid_order = np.lexsort((np.arange(bidders.size), bidders, -bid_prices))
    consumed = np.zeros(bidders.size, dtype=bool)
    deals: list[tuple[int, int]] = []
    ptr = 0
    n_bids = bid_order.size
    for li in listing_order:
        price = list_prices[li]
        while ptr < n_bids and consumed[bid_order[ptr]]:
            ptr += 1
        j = ptr
        while j < n_bids:
            bj = bid_order[j]
            if not consumed[bj] and bidders[bj] != sellers[li]:
                break
            j += 1
        if j >= n_bids or bid_prices[bid_order[j]] < price:
            continue
        bj = bid_order[j]
        consumed[bj] = True
        if attempt is None or attempt(int(li), int(bj)):
            deals.append((int(li), int(bj)))
    return deals


def clear(
    state: PopulationState,
    config: ScenarioConfig,
    listings: np.ndarray,
    bidders: np.ndarray,
    bid_prices: np.ndarray,
    step: int,
    rng: np.random.Generator,
) -> tuple[TransactionLog, int]:
    """Match, apply the clearance coin, settle, and carry unmatched listings.

    Returns the month's transactions and the count of voided settlements.
    A failed coin consumes the bid and carries the listing.
    """
    houses = state.houses
    log = TransactionLog()
    void_count = 0
    retired = np.zeros(listings.size, dtype=bool)
    listing_prices = houses.list_price[listings]
    sellers = houses.owner[listings]

    def attempt(li: int, bj: int) -> bool:
        nonlocal void_count
        if rng.random() >= config.internal.clearance_probability:
            return False
        house = int(listings[li])
        buyer = int(bidders[bj])
        deal = float(bid_prices[bj]) if config.deal_price_rule == "bid" \
            else float(houses.list_price[house])
        months_on = int(houses.months_listed[house])
        listed_at = float(houses.list_price[house])
        seller = int(houses.owner[house])
        result = settle_purchase(state, config, buyer, house, deal, step, rng)
        if result is None:
            void_count += 1
            return False
        retired[li] = True
        log.house.append(house)
        log.buyer.append(buyer)
        log.seller.append(seller)
        log.deal_price.append(deal)
        log.list_price.append(listed_at)
        log.months_on_market.append(months_on)
        log.loan.append(result.loan)
        log.tax_paid.append(result.tax_paid)
        log.discharged.append(result.discharged_principal)
        log.buyer_outlay.append(result.buyer_outlay)
        log.seller_receipt.append(result.seller_receipt)
        return True

    match_greedy(listing_prices, bid_prices, sellers, bidders, attempt)

    survivors = listings[~retired]
    houses.months_listed[survivors] += 1
    return log, void_count
