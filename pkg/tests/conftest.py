"""Shared fixtures: shipped presets and small synthetic configurations."""

import dataclasses

import numpy as np
import pytest

from housingabm.config import (
    BracketDistribution,
    ExternalParams,
    InternalParams,
    MonthlySeries,
    ScenarioConfig,
    load_scenario,
    parse_year_month,
)


@pytest.fixture(scope="session")
def preset2016():
    return load_scenario("sydney-2016")


@pytest.fixture(scope="session")
def preset2011():
    return load_scenario("sydney-2011")


@pytest.fixture(scope="session")
def preset2006():
    return load_scenario("sydney-2006")


def shrink(config: ScenarioConfig, n_households: int, **overrides) -> ScenarioConfig:
    """Rescale a preset to a small simulated population, keeping real totals."""
    real = config.external.household_count_series.at(config.calendar_start)
    small = dataclasses.replace(
        config,
        n_sim_households=n_households,
        scale_factor=real / n_households,
        **overrides,
    )
    small.validate()
    return small


def flat_series(start: int, value: float, months: int) -> MonthlySeries:
    return MonthlySeries(start, np.full(months, float(value)))


def toy_config(**overrides) -> ScenarioConfig:
    """A deterministic one-agent world: all behavioural halfwidths zero,
    no growth, no construction, no overseas demand, no listings or bids."""
    start = parse_year_month("2020-01")
    months = 12
    external = ExternalParams(
        tax_brackets=((0.0, 0.0),),
        house_owning_expense_rate=0.042,
        purchase_tax_rate=0.05,
        mortgage_rate_series=flat_series(start, 0.05, months),
        mortgage_duration_months=360,
        lvr_mean=0.6,
        lvr_halfwidth=0.0,
        mortgage_income_coeff=3.0,
        mortgage_income_exponent=0.8,
        overseas_capacity_series=flat_series(start, 0.0, months),
        construction_series=flat_series(start, 0.0, months),
        household_count_series=flat_series(start, 1.0, months),
    )
    internal = InternalParams(
        income_growth=(0.002, 0.0),
        consumption_income=(0.6, 0.0),
        consumption_wealth=(0.0025, 0.0),
        rent_income=(0.2, 0.0),
        rent_mortgage=(1.25, 0.0),
        downpayment_wealth=(0.9, 0.0),
        loan_value=(0.9, 0.0),
        debt_income=(0.4, 0.0),
        approval_rate=(0.07, 0.0),
        bid_factor=(1.29, 0.0),
        list_factor=(1.70, 0.0),
        sold_list_exponent=(0.5, 0.0),
        months_listed_exponent=(0.01, 0.0),
        expectation_downshift=0.6,
        list_probability=0.0,
        clearance_probability=1.0,
    )
    point = BracketDistribution(np.array([1000.0]), np.array([1.0]), "monthly")
    config = ScenarioConfig(
        name="toy",
        external=external,
        internal=internal,
        income_dist=point,
        wealth_dist=BracketDistribution(np.array([50000.0]), np.array([1.0]), "amount"),
        rent_dist=BracketDistribution(np.array([1500.0]), np.array([1.0]), "monthly"),
        mortgage_dist=BracketDistribution(np.array([2000.0]), np.array([1.0]), "monthly"),
        trend_aptitude=0.0,
        scale_factor=1.0,
        n_sim_households=1,
        equilibration_months=0,
        calendar_months=3,
        calendar_start=start,
        initial_price_mean=500000.0,
        initial_price_sigma=0.0,
        initial_dwelling_count=1.0,
        owner_occupier_fraction=1.0,
        investor_share=0.0,
        mortgaged_fraction=0.0,
    )
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    return config
