"""Agent population and housing stock: synthesis and monthly growth.

Households and houses are stored as parallel numpy arrays (one slot per
agent/house), which keeps the monthly loop vectorisable at the 200k-agent
scale.  Sentinel owner codes: -1 nobody, -2 developer, -3 overseas.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .config import InternalParams, ScenarioConfig, sample_bracket, sample_internal
from .fiscal import DEVELOPER, NOBODY, OVERSEAS, annuity_principal, compute_rent

__all__ = [
    "Behavior",
    "Households",
    "Houses",
    "PopulationState",
    "synthesize_population",
    "apply_demographics",
    "assign_tenancies",
    "owner_occupied_mask",
    "stochastic_round",
]


@dataclass
class Behavior:
    """Per-household draws of every behavioural parameter (arrays of shape (n,))."""

    income_growth: np.ndarray
    consumption_income: np.ndarray
    consumption_wealth: np.ndarray
    rent_income: np.ndarray
    rent_mortgage: np.ndarray
    downpayment_wealth: np.ndarray
    loan_value: np.ndarray
    debt_income: np.ndarray
    approval_rate: np.ndarray
    bid_factor: np.ndarray
    list_factor: np.ndarray
    sold_list_exponent: np.ndarray
    months_listed_exponent: np.ndarray

    @classmethod
    def sample(cls, internal: InternalParams, rng: np.random.Generator, n: int) -> "Behavior":
        return cls(**{
            name: np.asarray(sample_internal(spec, rng, size=n), dtype=float)
            for name, spec in internal.pairs().items()
        })

    def extend(self, other: "Behavior") -> None:
        for f in fields(self):
            setattr(self, f.name, np.concatenate([getattr(self, f.name), getattr(other, f.name)]))


@dataclass
class Households:
    income: np.ndarray  # AUD per month
    wealth: np.ndarray  # AUD
    residence: np.ndarray  # house index, or -1 when unhoused
    months_since_sale: np.ndarray  # -1 when never sold
    owned_count: np.ndarray
    behavior: Behavior

    @property
    def n(self) -> int:
        return self.income.size


@dataclass
class Houses:
    quality: np.ndarray  # immutable AUD anchor
    owner: np.ndarray  # household index or sentinel
    tenant: np.ndarray  # household index or -1
    rent: np.ndarray  # fixed for the tenancy, 0 when vacant
    principal: np.ndarray
    payment: np.ndarray
    rate: np.ndarray  # annual fraction at origination
    remaining_months: np.ndarray
    listed: np.ndarray  # bool
    list_price: np.ndarray
    months_listed: np.ndarray

    @property
    def n(self) -> int:
        return self.quality.size

    @classmethod
    def empty(cls, n: int) -> "Houses":
        return cls(
            quality=np.zeros(n),
            owner=np.full(n, NOBODY, dtype=np.int64),
            tenant=np.full(n, NOBODY, dtype=np.int64),
            rent=np.zeros(n),
            principal=np.zeros(n),
            payment=np.zeros(n),
            rate=np.zeros(n),
            remaining_months=np.zeros(n, dtype=np.int64),
            listed=np.zeros(n, dtype=bool),
            list_price=np.zeros(n),
            months_listed=np.zeros(n, dtype=np.int64),
        )

    def extend(self, other: "Houses") -> None:
        for f in fields(self):
            setattr(self, f.name, np.concatenate([getattr(self, f.name), getattr(other, f.name)]))


@dataclass
class PopulationState:
    households: Households
    houses: Houses
    step: int = 0

    @property
    def overseas_holdings(self) -> int:
        return int(np.count_nonzero(self.houses.owner == OVERSEAS))


def owner_occupied_mask(state: PopulationState) -> np.ndarray:
    """Houses currently occupied by their owning household."""
    hh, houses = state.households, state.houses
    out = np.zeros(houses.n, dtype=bool)
    res = hh.residence
    idx = np.nonzero(res >= 0)[0]
    out_houses = res[idx]
    out[out_houses[houses.owner[out_houses] == idx]] = True
    return out


def stochastic_round(value: float, rng: np.random.Generator) -> int:
    """Round so the expectation equals ``value`` (keeps scaled totals on track)."""
    base = int(np.floor(value))
    return base + int(rng.random() < value - base)


def _sample_households(config: ScenarioConfig, rng: np.random.Generator, n: int) -> Households:
    return Households(
        income=sample_bracket(config.income_dist, rng, size=n),
        wealth=sample_bracket(config.wealth_dist, rng, size=n),
        residence=np.full(n, NOBODY, dtype=np.int64),
        months_since_sale=np.full(n, -1, dtype=np.int64),
        owned_count=np.zeros(n, dtype=np.int64),
        behavior=Behavior.sample(config.internal, rng, n),
    )


def _sample_qualities(config: ScenarioConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    sigma = config.initial_price_sigma
    mu = np.log(config.initial_price_mean) - 0.5 * sigma**2
    return rng.lognormal(mu, sigma, size=n)


def synthesize_population(config: ScenarioConfig, rng: np.random.Generator) -> PopulationState:
    """Build the initial agents and stock.

    Owner-occupiers get one home each; a configured share of the stock is
    investor-owned and rented out; leftover stock sits with the developer.
    Mortgages are seeded from the payment distribution with consistent
    annuity terms.
    """
    n = config.n_sim_households
    hh = _sample_households(config, rng, n)
    m = max(1, int(round(config.initial_dwelling_count / config.scale_factor)))
    houses = Houses.empty(m)
    houses.quality = _sample_qualities(config, rng, m)

    hh_order = rng.permutation(n)
    house_order = rng.permutation(m)
    n_owner_occ = min(int(round(config.owner_occupier_fraction * n)), m)
    occupiers = hh_order[:n_owner_occ]
    own_homes = house_order[:n_owner_occ]
    houses.owner[own_homes] = occupiers
    hh.residence[occupiers] = own_homes
    hh.owned_count[occupiers] += 1

    n_investor = min(int(round(config.investor_share * m)), m - n_owner_occ)
    rentals = house_order[n_owner_occ:n_owner_occ + n_investor]
    if n_investor > 0:
        landlord_pool = occupiers if n_owner_occ > 0 else np.arange(n)
        landlords = rng.choice(landlord_pool, size=n_investor, replace=True)
        houses.owner[rentals] = landlords
        np.add.at(hh.owned_count, landlords, 1)

    leftovers = house_order[n_owner_occ + n_investor:]
    houses.owner[leftovers] = DEVELOPER

    # Seed mortgages on a configured fraction of household-owned houses.
    owned = np.nonzero(houses.owner >= 0)[0]
    mortgaged = owned[rng.random(owned.size) < config.mortgaged_fraction]
    if mortgaged.size:
        payment = sample_bracket(config.mortgage_dist, rng, size=mortgaged.size)
        rate = config.external.mortgage_rate_series.at(config.calendar_start)
        remaining = rng.integers(60, config.external.mortgage_duration_months + 1,
                                 size=mortgaged.size)
        houses.payment[mortgaged] = payment
        houses.rate[mortgaged] = rate
        houses.remaining_months[mortgaged] = remaining
        houses.principal[mortgaged] = annuity_principal(payment, rate, remaining)

    state = PopulationState(households=hh, houses=houses)
    assign_tenancies(state, config, rng)
    return state


def assign_tenancies(state: PopulationState, config: ScenarioConfig,
                     rng: np.random.Generator) -> int:
    """Match unhoused households to vacant rentable houses; returns match count.

    Rentable stock is household valence and overseas holdings.  Rent is set
    once per tenancy from the tenant's behaviour and the house's mortgage.
    """
    hh, houses = state.households, state.houses
    occ = owner_occupied_mask(state)
    vacant_mask = (
        (houses.tenant == NOBODY) & ~occ & (houses.owner != DEVELOPER) & (houses.owner != NOBODY)
    )
    unhoused = np.nonzero(hh.residence == NOBODY)[0]
    # An unhoused owner with a vacant house of their own moves back in.
    owners = unhoused[hh.owned_count[unhoused] > 0]
    for i in owners:
        mine = np.nonzero(vacant_mask & (houses.owner == i))[0]
        if mine.size:
            hh.residence[i] = mine[0]
            vacant_mask[mine[0]] = False
    vacant = np.nonzero(vacant_mask)[0]
    unhoused = np.nonzero(hh.residence == NOBODY)[0]
    k = min(vacant.size, unhoused.size)
    if k == 0:
        return 0
    tenants = unhoused[:k]
    homes = vacant[:k]
    # Never rent a household its own house; such pairs wait for next month.
    keep = houses.owner[homes] != tenants
    tenants, homes = tenants[keep], homes[keep]
    k = tenants.size
    if k == 0:
        return 0
    houses.tenant[homes] = tenants
    hh.residence[tenants] = homes
    phi_r = sample_bracket(config.rent_dist, rng, size=k)
    houses.rent[homes] = compute_rent(
        phi_r,
        hh.behavior.rent_income[tenants],
        hh.income[tenants],
        hh.behavior.rent_mortgage[tenants],
        houses.payment[homes],
    )
    return k


def apply_demographics(
    state: PopulationState,
    config: ScenarioConfig,
    step: int,
    rng: np.random.Generator,
    recent_deal_prices: np.ndarray | None = None,
) -> tuple[int, int]:
    """Monthly entry of new households and developer construction.

    Returns (households added, houses added).  Series are frozen at the
    calendar start during equilibration, so growth only acts in calendar time.
    """
    month = config.series_month(step)
    prev_month = config.series_month(step - 1)
    series = config.external.household_count_series
    delta = max(0.0, series.at(month) - series.at(prev_month))
    n_new = stochastic_round(delta / config.scale_factor, rng)
    if n_new:
        newcomers = _sample_households(config, rng, n_new)
        hh = state.households
        hh.income = np.concatenate([hh.income, newcomers.income])
        hh.wealth = np.concatenate([hh.wealth, newcomers.wealth])
        hh.residence = np.concatenate([hh.residence, newcomers.residence])
        hh.months_since_sale = np.concatenate([hh.months_since_sale, newcomers.months_since_sale])
        hh.owned_count = np.concatenate([hh.owned_count, newcomers.owned_count])
        hh.behavior.extend(newcomers.behavior)

    built_real = config.external.construction_series.at(month) if step >= 0 else 0.0
    n_built = stochastic_round(built_real / config.scale_factor, rng)
    if n_built:
        new_houses = Houses.empty(n_built)
        if recent_deal_prices is not None and recent_deal_prices.size >= 30:
            new_houses.quality = rng.choice(recent_deal_prices, size=n_built)
        else:
            new_houses.quality = _sample_qualities(config, rng, n_built)
        new_houses.owner[:] = DEVELOPER
        state.houses.extend(new_houses)

    return n_new, n_built
