"""Monthly household accounting: budget update, rent, annuities, settlement.

All functions are vectorised over numpy arrays; scalar inputs broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExternalParams, ScenarioConfig, effective_tax_rate

__all__ = [
    "MonthlyFlows",
    "annuity_payment",
    "annuity_principal",
    "outstanding_principal",
    "compute_rent",
    "update_budget",
    "settle_purchase",
    "SettlementResult",
]

# Sentinel owner / tenant codes shared across modules.
NOBODY = -1
DEVELOPER = -2
OVERSEAS = -3


def annuity_payment(principal, annual_rate, months):
    """Fixed monthly payment amortising ``principal`` over ``months``."""
    principal = np.asarray(principal, dtype=float)
    annual_rate = np.asarray(annual_rate, dtype=float)
    months = np.asarray(months)
    r = annual_rate / 12.0
    with np.errstate(divide="ignore", invalid="ignore"):
        geometric = principal * r / (1.0 - (1.0 + r) ** (-months))
        linear = principal / np.where(months > 0, months, 1)
    out = np.where(r > 0, geometric, linear)
    out = np.where(principal > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def annuity_principal(payment, annual_rate, months):
    """Present value of ``months`` payments at ``annual_rate`` (inverse of annuity_payment)."""
    payment = np.asarray(payment, dtype=float)
    r = np.asarray(annual_rate, dtype=float) / 12.0
    months = np.asarray(months)
    with np.errstate(divide="ignore", invalid="ignore"):
        geometric = payment * (1.0 - (1.0 + r) ** (-months)) / np.where(r > 0, r, 1.0)
    out = np.where(r > 0, geometric, payment * months)
    return float(out) if out.ndim == 0 else out


def outstanding_principal(principal, annual_rate, months_total, months_paid):
    """Closed-form balance after ``months_paid`` payments on a standard annuity."""
    r = annual_rate / 12.0
    if r == 0:
        return principal * (1.0 - months_paid / months_total)
    growth = (1.0 + r) ** months_paid
    total = (1.0 + r) ** months_total
    return principal * (total - growth) / (total - 1.0)


def compute_rent(phi_r, rent_income_frac, tenant_income, rent_mortgage_frac, mortgage_payment):
    """Monthly rent: equal-weight blend of the market draw, tenant income and
    the landlord's mortgage payment on the house."""
    return (
        np.asarray(phi_r, dtype=float)
        + np.asarray(rent_income_frac, dtype=float) * np.asarray(tenant_income, dtype=float)
        + np.asarray(rent_mortgage_frac, dtype=float) * np.asarray(mortgage_payment, dtype=float)
    ) / 3.0


@dataclass
class MonthlyFlows:
    """Aggregate AUD flows of one budget-update pass, for conservation checks."""

    income_after_tax: float = 0.0
    consumption_from_income: float = 0.0
    consumption_from_wealth: float = 0.0
    rent_paid: float = 0.0
    rent_received: float = 0.0  # by household landlords only
    rent_to_external: float = 0.0  # to overseas-owned houses
    owning_expenses: float = 0.0
    mortgage_paid: float = 0.0
    wealth_before: float = 0.0
    wealth_after: float = 0.0

    def household_delta(self) -> float:
        """The flow identity's prediction for the total household wealth change."""
        return (
            self.income_after_tax
            - self.consumption_from_income
            - self.consumption_from_wealth
            - self.rent_paid
            + self.rent_received
            - self.owning_expenses
            - self.mortgage_paid
        )


def update_budget(state, env: ExternalParams, owner_occupied: np.ndarray) -> MonthlyFlows:
    """Apply the monthly income/wealth update to every household in place.

    Income grows by each agent's growth factor; wealth follows the budget
    rule with consumption fractions, average tax, rent flows and per-house
    carrying costs.  Mortgages amortise one step.  ``owner_occupied`` flags
    houses occupied by their owner (no rent flows on those).
    """
    hh = state.households
    houses = state.houses

    wealth_before = float(hh.wealth.sum())
    hh.income *= 1.0 + hh.behavior.income_growth
    tax_rate = effective_tax_rate(12.0 * hh.income, env.tax_brackets)
    after_tax = (1.0 - tax_rate) * hh.income
    kept = (1.0 - hh.behavior.consumption_income) * after_tax
    wealth_drain = hh.behavior.consumption_wealth * hh.wealth

    # Rent paid by tenants (tenancy rent is fixed for its duration).
    renting = (hh.residence >= 0) & ~_owns_residence(hh, houses)
    rent_paid = np.zeros(hh.n)
    rent_paid[renting] = houses.rent[hh.residence[renting]]

    # Per-house carrying cost for household owners, net of rent received.
    owned = houses.owner >= 0
    payment_due = np.where(houses.remaining_months > 0, houses.payment, 0.0)
    tenanted = houses.tenant >= 0
    cost = (
        env.house_owning_expense_rate / 12.0 * houses.quality
        + payment_due
        - np.where(tenanted, houses.rent, 0.0)
    )
    owner_cost = np.bincount(
        houses.owner[owned], weights=cost[owned], minlength=hh.n
    )

    hh.wealth = hh.wealth - wealth_drain + kept - rent_paid - owner_cost

    # Amortise every live mortgage (household-owned only; external agents pay cash).
    live = (houses.remaining_months > 0) & (houses.principal > 0)
    r = houses.rate[live] / 12.0
    houses.principal[live] = houses.principal[live] * (1.0 + r) - houses.payment[live]
    houses.remaining_months[live] -= 1
    done = live & (houses.remaining_months <= 0)
    houses.principal[done] = 0.0
    houses.payment[done] = 0.0

    rent_recv_houses = owned & tenanted
    overseas_rent = float(houses.rent[(houses.owner == OVERSEAS) & tenanted].sum())
    return MonthlyFlows(
        income_after_tax=float(after_tax.sum()),
        consumption_from_income=float((hh.behavior.consumption_income * after_tax).sum()),
        consumption_from_wealth=float(wealth_drain.sum()),
        rent_paid=float(rent_paid.sum()),
        rent_received=float(houses.rent[rent_recv_houses].sum()),
        rent_to_external=overseas_rent,
        owning_expenses=float(
            (env.house_owning_expense_rate / 12.0 * houses.quality[owned]).sum()
        ),
        mortgage_paid=float(payment_due[owned].sum()),
        wealth_before=wealth_before,
        wealth_after=float(hh.wealth.sum()),
    )


def _owns_residence(hh, houses) -> np.ndarray:
    res = hh.residence
    out = np.zeros(hh.n, dtype=bool)
    mask = res >= 0
    idx = np.nonzero(mask)[0]
    out[idx] = houses.owner[res[idx]] == idx
    return out


@dataclass
class SettlementResult:
    """Cash legs of one completed purchase, for the conservation ledger."""

    loan: float
    tax_paid: float
    discharged_principal: float
    buyer_outlay: float  # household buyer cash out (0 for overseas)
    seller_receipt: float  # household seller cash in (0 for developer/overseas)


def settle_purchase(
    state,
    config: ScenarioConfig,
    buyer: int,
    house: int,
    price: float,
    step: int,
    rng: np.random.Generator,
) -> SettlementResult | None:
    """Transfer ownership and cash for a matched deal.

    Returns None (deal voided) when a household buyer cannot fund the
    downpayment plus purchase tax within the configured overdraft bound.
    """
    env = config.external
    houses = state.houses
    hh = state.households
    seller = int(houses.owner[house])
    tax = env.purchase_tax_rate * price

    if buyer == OVERSEAS:
        loan = 0.0
        outlay = 0.0
    else:
        lvr = float(np.clip(
            rng.uniform(env.lvr_mean - env.lvr_halfwidth, env.lvr_mean + env.lvr_halfwidth),
            0.0, 1.0,
        ))
        loan = price * lvr
        outlay = (price - loan) + tax
        if outlay > hh.wealth[buyer] + config.overdraft_limit:
            return None

    discharged = float(houses.principal[house])
    seller_receipt = 0.0
    if seller >= 0:
        hh.wealth[seller] += price - discharged
        hh.months_since_sale[seller] = 0
        hh.owned_count[seller] -= 1
        if hh.residence[seller] == house:
            hh.residence[seller] = NOBODY
        seller_receipt = price - discharged

    houses.principal[house] = 0.0
    houses.payment[house] = 0.0
    houses.remaining_months[house] = 0
    houses.rate[house] = 0.0

    houses.owner[house] = buyer
    houses.listed[house] = False
    houses.months_listed[house] = 0

    buyer_outlay = 0.0
    if buyer >= 0:
        hh.wealth[buyer] -= outlay
        hh.owned_count[buyer] += 1
        buyer_outlay = outlay
        if loan > 0:
            months = env.mortgage_duration_months
            rate = env.mortgage_rate_series.at(config.series_month(step))
            houses.principal[house] = loan
            houses.rate[house] = rate
            houses.remaining_months[house] = months
            houses.payment[house] = annuity_payment(loan, rate, months)
        tenant = int(houses.tenant[house])
        if tenant == buyer:
            # Tenant bought the home they rent: tenancy dissolves.
            houses.tenant[house] = NOBODY
            houses.rent[house] = 0.0
        elif tenant == NOBODY and not _household_owns_residence(hh, houses, buyer):
            # Unhoused or renting buyer moves into a vacant purchase.
            old = int(hh.residence[buyer])
            if old >= 0:
                houses.tenant[old] = NOBODY
                houses.rent[old] = 0.0
            hh.residence[buyer] = house
        # A sitting tenant (other than the buyer) keeps the tenancy.

    return SettlementResult(
        loan=loan,
        tax_paid=tax if buyer >= 0 else 0.0,
        discharged_principal=discharged,
        buyer_outlay=buyer_outlay,
        seller_receipt=seller_receipt,
    )


def _household_owns_residence(hh, houses, i: int) -> bool:
    res = int(hh.residence[i])
    return res >= 0 and int(houses.owner[res]) == i
