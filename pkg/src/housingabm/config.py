"""Scenario loading, validation and parameter sampling.

A scenario is a directory with one key-value text file (``params.txt``) for
scalar parameters, one CSV per bracket distribution (columns ``lower_bound,
mass``) and one CSV per monthly time series (columns ``year_month,value``).
All monetary amounts are AUD, all rates are decimal fractions.
"""

from __future__ import annotations

import csv
import dataclasses
import importlib.resources
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ScenarioError",
    "BracketDistribution",
    "MonthlySeries",
    "ExternalParams",
    "InternalParams",
    "ScenarioConfig",
    "load_scenario",
    "save_scenario",
    "preset_path",
    "sample_bracket",
    "sample_internal",
    "effective_tax_rate",
    "parse_year_month",
    "format_year_month",
]


class ScenarioError(ValueError):
    """Raised when a scenario file is missing, malformed or inconsistent."""


def parse_year_month(text: str) -> int:
    """Parse ``YYYY-MM`` into a linear month index (year*12 + month-1)."""
    try:
        year_s, month_s = text.strip().split("-")
        year, month = int(year_s), int(month_s)
    except ValueError as exc:
        raise ScenarioError(f"bad year-month {text!r}, expected YYYY-MM") from exc
    if not 1 <= month <= 12:
        raise ScenarioError(f"bad month in {text!r}")
    return year * 12 + month - 1


def format_year_month(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


# ---------------------------------------------------------------------------
# Bracket distributions


@dataclass(frozen=True)
class BracketDistribution:
    """A piecewise-uniform distribution given by bracket lower bounds and masses.

    ``period`` declares the units of the stored bounds: "monthly", "weekly",
    "annual" (flows, convertible to monthly) or "amount" (a plain stock).
    """

    bounds: np.ndarray
    masses: np.ndarray
    period: str = "monthly"

    def __post_init__(self):
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))

    def validate(self, name: str = "distribution") -> None:
        if self.bounds.ndim != 1 or self.bounds.size == 0:
            raise ScenarioError(f"{name}: needs at least one bracket")
        if self.bounds.size != self.masses.size:
            raise ScenarioError(f"{name}: bounds/masses length mismatch")
        if np.any(np.diff(self.bounds) <= 0):
            raise ScenarioError(f"{name}: lower bounds must be strictly increasing")
        if np.any(self.masses < 0):
            raise ScenarioError(f"{name}: negative mass")
        total = float(self.masses.sum())
        if abs(total - 1.0) > 1e-9:
            raise ScenarioError(f"{name}: masses sum to {total}, expected 1")
        if self.period not in ("monthly", "weekly", "annual", "amount"):
            raise ScenarioError(f"{name}: unknown period flag {self.period!r}")

    def to_monthly(self) -> "BracketDistribution":
        """Convert weekly/annual flow bounds to monthly AUD; stocks pass through."""
        if self.period == "weekly":
            factor = 52.0 / 12.0
        elif self.period == "annual":
            factor = 1.0 / 12.0
        else:
            return self
        return BracketDistribution(self.bounds * factor, self.masses, "monthly")

    def mean(self) -> float:
        """Analytic mean under uniform-within-bracket sampling."""
        low = self.bounds
        high = np.append(self.bounds[1:], 2.0 * self.bounds[-1])
        return float(np.sum(self.masses * 0.5 * (low + high)))


def sample_bracket(dist: BracketDistribution, rng: np.random.Generator, size=None):
    """Draw from ``dist``: pick a bracket by mass, then uniform within it.

    The top bracket spans [lower, 2*lower]; other brackets span up to the
    next lower bound.
    """
    low = dist.bounds
    high = np.append(dist.bounds[1:], 2.0 * dist.bounds[-1])
    idx = rng.choice(low.size, size=size, p=dist.masses)
    value = rng.uniform(low[idx], high[idx])
    return value if size is not None else float(value)


def sample_internal(spec: tuple[float, float], rng: np.random.Generator, size=None):
    """Uniform draw on [mean - halfwidth, mean + halfwidth]."""
    mean, halfwidth = spec
    if halfwidth == 0.0:
        return np.full(size, mean) if size is not None else mean
    value = rng.uniform(mean - halfwidth, mean + halfwidth, size=size)
    return value if size is not None else float(value)


# ---------------------------------------------------------------------------
# Monthly time series


@dataclass(frozen=True)
class MonthlySeries:
    """A contiguous monthly series starting at a linear month index."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def end(self) -> int:
        """One past the last covered month."""
        return self.start + self.values.size

    def at(self, month: int) -> float:
        if not self.start <= month < self.end:
            raise ScenarioError(
                f"series undefined at {format_year_month(month)} "
                f"(covers {format_year_month(self.start)}..{format_year_month(self.end - 1)})"
            )
        return float(self.values[month - self.start])


# ---------------------------------------------------------------------------
# Parameter blocks


@dataclass(frozen=True)
class ExternalParams:
    """Observed financial and demographic conditions for one period."""

    tax_brackets: tuple[tuple[float, float], ...]  # (annual lower bound, marginal rate)
    house_owning_expense_rate: float  # fraction per year
    purchase_tax_rate: float
    mortgage_rate_series: MonthlySeries  # annual fraction, per month
    mortgage_duration_months: int
    lvr_mean: float
    lvr_halfwidth: float
    mortgage_income_coeff: float  # AUD-scale coefficient of the mortgage-income fit
    mortgage_income_exponent: float
    overseas_capacity_series: MonthlySeries  # target real-dwelling holdings
    construction_series: MonthlySeries  # new real dwellings per month
    household_count_series: MonthlySeries  # real households

    def validate(self) -> None:
        if not self.tax_brackets:
            raise ScenarioError("tax_brackets: empty")
        bounds = [b for b, _ in self.tax_brackets]
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ScenarioError("tax_brackets: bounds must be strictly increasing")
        for _, rate in self.tax_brackets:
            if not 0.0 <= rate <= 1.0:
                raise ScenarioError(f"tax rate {rate} outside [0,1]")
        for name in ("house_owning_expense_rate", "purchase_tax_rate", "lvr_mean", "lvr_halfwidth"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ScenarioError(f"{name}={value} outside [0,1]")
        if self.mortgage_duration_months <= 0:
            raise ScenarioError("mortgage_duration_months must be positive")
        if self.mortgage_income_coeff <= 0 or self.mortgage_income_exponent <= 0:
            raise ScenarioError("mortgage-income fit parameters must be positive")


_RATE_PAIRS = (
    "income_growth",  # b_I
    "consumption_income",  # b_CI
    "consumption_wealth",  # b_CW
    "rent_income",  # b_RI
    "rent_mortgage",  # b_RH
    "downpayment_wealth",  # b_ATW
    "loan_value",  # b_LTV
    "debt_income",  # b_DTI
    "approval_rate",  # b_M
    "bid_factor",  # b_b
    "list_factor",  # b_l
    "sold_list_exponent",  # b_s
    "months_listed_exponent",  # b_d
)


@dataclass(frozen=True)
class InternalParams:
    """Per-agent behavioural parameters as (mean, halfwidth) uniform specs."""

    income_growth: tuple[float, float]
    consumption_income: tuple[float, float]
    consumption_wealth: tuple[float, float]
    rent_income: tuple[float, float]
    rent_mortgage: tuple[float, float]
    downpayment_wealth: tuple[float, float]
    loan_value: tuple[float, float]
    debt_income: tuple[float, float]
    approval_rate: tuple[float, float]
    bid_factor: tuple[float, float]
    list_factor: tuple[float, float]
    sold_list_exponent: tuple[float, float]
    months_listed_exponent: tuple[float, float]
    expectation_downshift: float = 0.6
    list_probability: float = 0.01
    clearance_probability: float = 0.8

    def validate(self) -> None:
        for name in _RATE_PAIRS:
            mean, halfwidth = getattr(self, name)
            if halfwidth < 0:
                raise ScenarioError(f"{name}: negative halfwidth")
            if mean - halfwidth < 0:
                raise ScenarioError(f"{name}: mean - halfwidth below zero")
        for name in ("expectation_downshift", "list_probability", "clearance_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ScenarioError(f"{name}={value} outside [0,1]")

    def pairs(self) -> dict[str, tuple[float, float]]:
        return {name: getattr(self, name) for name in _RATE_PAIRS}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one simulated period."""

    name: str
    external: ExternalParams
    internal: InternalParams
    income_dist: BracketDistribution  # monthly AUD after load
    wealth_dist: BracketDistribution  # AUD stock
    rent_dist: BracketDistribution  # monthly AUD after load
    mortgage_dist: BracketDistribution  # monthly AUD payment
    trend_aptitude: float
    scale_factor: float  # real households per simulated household
    n_sim_households: int
    equilibration_months: int
    calendar_months: int
    calendar_start: int  # linear month index
    initial_price_mean: float
    initial_price_sigma: float
    initial_dwelling_count: float  # real dwellings at calendar start
    # Invented structural defaults (see README): initial allocation and urgency.
    owner_occupier_fraction: float = 0.64
    investor_share: float = 0.30
    mortgaged_fraction: float = 0.40
    buyer_urgency: float = 1.2
    seller_urgency: float = 0.9
    urgency_window_months: int = 6
    max_portfolio: int = 5
    deal_price_rule: str = "bid"  # "bid" or "list"
    p1_denominator_floor: float = 0.005
    overdraft_limit: float = 0.0
    overseas_bid_spread: float = 0.05  # half-width of the overseas bid draw around the market level

    def validate(self) -> None:
        self.external.validate()
        self.internal.validate()
        for dist_name in ("income_dist", "wealth_dist", "rent_dist", "mortgage_dist"):
            getattr(self, dist_name).validate(dist_name)
        if self.n_sim_households <= 0:
            raise ScenarioError("n_sim_households must be positive")
        if self.equilibration_months < 0:
            raise ScenarioError("equilibration_months must be non-negative")
        if self.calendar_months < 1:
            raise ScenarioError("calendar_months must be at least 1")
        if self.scale_factor < 1.0:
            raise ScenarioError("scale_factor must be at least 1")
        if self.initial_price_mean <= 0 or self.initial_price_sigma < 0:
            raise ScenarioError("initial price parameters out of range")
        if self.initial_dwelling_count <= 0:
            raise ScenarioError("initial_dwelling_count must be positive")
        if not 0.0 <= self.owner_occupier_fraction <= 1.0:
            raise ScenarioError("owner_occupier_fraction outside [0,1]")
        if not 0.0 <= self.investor_share <= 1.0:
            raise ScenarioError("investor_share outside [0,1]")
        if not 0.0 <= self.mortgaged_fraction <= 1.0:
            raise ScenarioError("mortgaged_fraction outside [0,1]")
        if self.deal_price_rule not in ("bid", "list"):
            raise ScenarioError(f"deal_price_rule {self.deal_price_rule!r} not in (bid, list)")
        if self.p1_denominator_floor <= 0:
            raise ScenarioError("p1_denominator_floor must be positive")
        if not 0.0 <= self.overseas_bid_spread < 1.0:
            raise ScenarioError("overseas_bid_spread outside [0,1)")
        # Calendar coverage; equilibration months reuse the calendar-start values.
        end = self.calendar_start + self.calendar_months
        for series_name in ("mortgage_rate_series", "overseas_capacity_series",
                            "construction_series", "household_count_series"):
            series: MonthlySeries = getattr(self.external, series_name)
            if series.start > self.calendar_start or series.end < end:
                raise ScenarioError(
                    f"{series_name} does not cover the calendar window "
                    f"{format_year_month(self.calendar_start)}..{format_year_month(end - 1)}"
                )

    @property
    def calendar_end(self) -> int:
        return self.calendar_start + self.calendar_months

    @property
    def total_months(self) -> int:
        return self.equilibration_months + self.calendar_months

    def series_month(self, step: int) -> int:
        """Map a simulation step to a series month, freezing pre-calendar steps."""
        return self.calendar_start + max(0, step - self.equilibration_months)


# ---------------------------------------------------------------------------
# Tax


def effective_tax_rate(annual_income, brackets) -> np.ndarray | float:
    """Progressive average tax rate on annual income; zero below the first bound."""
    income = np.asarray(annual_income, dtype=float)
    tax = np.zeros_like(income)
    bounds = [b for b, _ in brackets] + [math.inf]
    for i, (low, rate) in enumerate(brackets):
        tax += rate * np.clip(income - low, 0.0, bounds[i + 1] - low)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate_arr = np.where(income > 0, tax / np.where(income > 0, income, 1.0), 0.0)
    if np.isscalar(annual_income):
        return float(rate_arr)
    return rate_arr


# ---------------------------------------------------------------------------
# File format

_DIST_FILES = {
    "income_dist": "income.csv",
    "wealth_dist": "wealth.csv",
    "rent_dist": "rent.csv",
    "mortgage_dist": "mortgage.csv",
}
_SERIES_FILES = {
    "mortgage_rate_series": "mortgage_rate.csv",
    "overseas_capacity_series": "overseas_capacity.csv",
    "construction_series": "construction.csv",
    "household_count_series": "households.csv",
}


def _read_params(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ScenarioError(f"missing scenario file {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _read_dist(path: Path, period: str) -> BracketDistribution:
    if not path.is_file():
        raise ScenarioError(f"missing distribution file {path}")
    bounds, masses = [], []
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {"lower_bound", "mass"}:
            raise ScenarioError(f"{path}: expected columns lower_bound,mass")
        for row in reader:
            try:
                bounds.append(float(row["lower_bound"]))
                masses.append(float(row["mass"]))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"{path}: malformed row {row}") from exc
    dist = BracketDistribution(np.array(bounds), np.array(masses), period)
    dist.validate(path.name)
    return dist


def _read_series(path: Path) -> MonthlySeries:
    if not path.is_file():
        raise ScenarioError(f"missing time series file {path}")
    months, values = [], []
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {"year_month", "value"}:
            raise ScenarioError(f"{path}: expected columns year_month,value")
        for row in reader:
            months.append(parse_year_month(row["year_month"]))
            try:
                values.append(float(row["value"]))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"{path}: malformed row {row}") from exc
    if not months:
        raise ScenarioError(f"{path}: empty series")
    if any(b - a != 1 for a, b in zip(months, months[1:])):
        raise ScenarioError(f"{path}: months must be contiguous and increasing")
    return MonthlySeries(months[0], np.array(values))


def _parse_tax_brackets(text: str) -> tuple[tuple[float, float], ...]:
    brackets = []
    for part in text.split(","):
        try:
            bound, rate = part.split(":")
            brackets.append((float(bound), float(rate)))
        except ValueError as exc:
            raise ScenarioError(f"bad tax bracket entry {part!r}, expected bound:rate") from exc
    return tuple(brackets)


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split()
    if len(parts) != 2:
        raise ScenarioError(f"expected 'mean halfwidth', got {text!r}")
    return float(parts[0]), float(parts[1])


def preset_path(name: str) -> Path:
    """Resolve a shipped preset name (e.g. ``sydney-2016``) to its directory."""
    root = importlib.resources.files("housingabm") / "presets" / name
    path = Path(str(root))
    if not path.is_dir():
        raise ScenarioError(f"unknown preset {name!r}")
    return path


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario directory (or shipped preset name)."""
    directory = Path(path)
    if not directory.is_dir():
        try:
            directory = preset_path(str(path))
        except ScenarioError:
            raise ScenarioError(f"scenario path {path} not found") from None

    params = _read_params(directory / "params.txt")

    def need(key: str) -> str:
        if key not in params:
            raise ScenarioError(f"{directory / 'params.txt'}: missing key {key!r}")
        return params[key]

    def get_float(key: str, default: float | None = None) -> float:
        if key not in params:
            if default is None:
                raise ScenarioError(f"{directory / 'params.txt'}: missing key {key!r}")
            return default
        try:
            return float(params[key])
        except ValueError as exc:
            raise ScenarioError(f"{key}: not a number: {params[key]!r}") from exc

    def get_int(key: str, default: int | None = None) -> int:
        return int(round(get_float(key, None if default is None else float(default))))

    external = ExternalParams(
        tax_brackets=_parse_tax_brackets(need("tax_brackets")),
        house_owning_expense_rate=get_float("house_owning_expense_rate"),
        purchase_tax_rate=get_float("purchase_tax_rate"),
        mortgage_rate_series=_read_series(directory / _SERIES_FILES["mortgage_rate_series"]),
        mortgage_duration_months=get_int("mortgage_duration_months"),
        lvr_mean=get_float("lvr_mean"),
        lvr_halfwidth=get_float("lvr_halfwidth"),
        mortgage_income_coeff=get_float("mortgage_income_coeff"),
        mortgage_income_exponent=get_float("mortgage_income_exponent"),
        overseas_capacity_series=_read_series(directory / _SERIES_FILES["overseas_capacity_series"]),
        construction_series=_read_series(directory / _SERIES_FILES["construction_series"]),
        household_count_series=_read_series(directory / _SERIES_FILES["household_count_series"]),
    )

    internal_kwargs = {name: _parse_pair(need(name)) for name in _RATE_PAIRS}
    internal = InternalParams(
        expectation_downshift=get_float("expectation_downshift", 0.6),
        list_probability=get_float("list_probability", 0.01),
        clearance_probability=get_float("clearance_probability", 0.8),
        **internal_kwargs,
    )

    dists = {}
    for attr, filename in _DIST_FILES.items():
        period = params.get(f"{attr}_period", "monthly")
        dists[attr] = _read_dist(directory / filename, period).to_monthly()

    config = ScenarioConfig(
        name=params.get("name", directory.name),
        external=external,
        internal=internal,
        trend_aptitude=get_float("trend_aptitude"),
        scale_factor=get_float("scale_factor"),
        n_sim_households=get_int("n_sim_households"),
        equilibration_months=get_int("equilibration_months", 26),
        calendar_months=get_int("calendar_months", 30),
        calendar_start=parse_year_month(need("calendar_start")),
        initial_price_mean=get_float("initial_price_mean"),
        initial_price_sigma=get_float("initial_price_sigma"),
        initial_dwelling_count=get_float("initial_dwelling_count"),
        owner_occupier_fraction=get_float("owner_occupier_fraction", 0.64),
        investor_share=get_float("investor_share", 0.30),
        mortgaged_fraction=get_float("mortgaged_fraction", 0.40),
        buyer_urgency=get_float("buyer_urgency", 1.2),
        seller_urgency=get_float("seller_urgency", 0.9),
        urgency_window_months=get_int("urgency_window_months", 6),
        max_portfolio=get_int("max_portfolio", 5),
        deal_price_rule=params.get("deal_price_rule", "bid"),
        p1_denominator_floor=get_float("p1_denominator_floor", 0.005),
        overdraft_limit=get_float("overdraft_limit", 0.0),
        overseas_bid_spread=get_float("overseas_bid_spread", 0.05),
        **dists,
    )
    config.validate()
    return config


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    """Write a scenario directory that reloads to a bit-identical configuration."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    ext = config.external
    lines = [
        f"name = {config.name}",
        "tax_brackets = " + ", ".join(f"{b!r}:{r!r}" for b, r in ext.tax_brackets),
        f"house_owning_expense_rate = {ext.house_owning_expense_rate!r}",
        f"purchase_tax_rate = {ext.purchase_tax_rate!r}",
        f"mortgage_duration_months = {ext.mortgage_duration_months}",
        f"lvr_mean = {ext.lvr_mean!r}",
        f"lvr_halfwidth = {ext.lvr_halfwidth!r}",
        f"mortgage_income_coeff = {ext.mortgage_income_coeff!r}",
        f"mortgage_income_exponent = {ext.mortgage_income_exponent!r}",
        f"trend_aptitude = {config.trend_aptitude!r}",
        f"scale_factor = {config.scale_factor!r}",
        f"n_sim_households = {config.n_sim_households}",
        f"equilibration_months = {config.equilibration_months}",
        f"calendar_months = {config.calendar_months}",
        f"calendar_start = {format_year_month(config.calendar_start)}",
        f"initial_price_mean = {config.initial_price_mean!r}",
        f"initial_price_sigma = {config.initial_price_sigma!r}",
        f"initial_dwelling_count = {config.initial_dwelling_count!r}",
        f"owner_occupier_fraction = {config.owner_occupier_fraction!r}",
        f"investor_share = {config.investor_share!r}",
        f"mortgaged_fraction = {config.mortgaged_fraction!r}",
        f"buyer_urgency = {config.buyer_urgency!r}",
        f"seller_urgency = {config.seller_urgency!r}",
        f"urgency_window_months = {config.urgency_window_months}",
        f"max_portfolio = {config.max_portfolio}",
        f"deal_price_rule = {config.deal_price_rule}",
        f"p1_denominator_floor = {config.p1_denominator_floor!r}",
        f"overdraft_limit = {config.overdraft_limit!r}",
        f"overseas_bid_spread = {config.overseas_bid_spread!r}",
    ]
    for name in _RATE_PAIRS:
        mean, halfwidth = getattr(config.internal, name)
        lines.append(f"{name} = {mean!r} {halfwidth!r}")
    for name in ("expectation_downshift", "list_probability", "clearance_probability"):
        lines.append(f"{name} = {getattr(config.internal, name)!r}")
    for attr in _DIST_FILES:
        lines.append(f"{attr}_period = {getattr(config, attr).period}")
    (directory / "params.txt").write_text("\n".join(lines) + "\n")

    for attr, filename in _DIST_FILES.items():
        dist: BracketDistribution = getattr(config, attr)
        with (directory / filename).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["lower_bound", "mass"])
            for bound, mass in zip(dist.bounds, dist.masses):
                writer.writerow([repr(float(bound)), repr(float(mass))])
    for attr, filename in _SERIES_FILES.items():
        series: MonthlySeries = getattr(ext, attr)
        with (directory / filename).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["year_month", "value"])
            for offset, value in enumerate(series.values):
                writer.writerow([format_year_month(series.start + offset), repr(float(value))])
