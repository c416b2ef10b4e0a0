"""Orchestration: the monthly loop, trajectories and deterministic ensembles."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig, format_year_month
from .fiscal import MonthlyFlows, update_budget
from .market import MarketStats, TransactionLog, clear, collect_bids, collect_listings
from .population import (
    PopulationState,
    apply_demographics,
    assign_tenancies,
    owner_occupied_mask,
    synthesize_population,
)
from .priceindex import RepeatSalesIndex, annual_change, monthly_mean, moving_average

__all__ = [
    "MonthRecord",
    "TrajectoryOutput",
    "EnsembleOutput",
    "EngineContext",
    "step_month",
    "run_trajectory",
    "run_ensemble",
    "ensemble_stats",
    "trajectory_seed",
]

QUANTILES = (5, 25, 50, 75, 95)


@dataclass
class MonthRecord:
    """Everything recorded about one simulated month (including equilibration)."""

    step: int
    mean_price: float
    n_deals: int
    n_bids: int
    n_listings: int
    clamp_count: int
    void_count: int
    delta_hpi: float
    sold_to_list: float
    flows: MonthlyFlows
    settlement_outlays: float
    settlement_receipts: float
    wealth_end: float


@dataclass
class EngineContext:
    """Mutable cross-month state of one trajectory."""

    config: ScenarioConfig
    rsi: RepeatSalesIndex
    stats: MarketStats = field(default_factory=MarketStats)
    monthly_means: list = field(default_factory=list)
    recent_prices: list = field(default_factory=list)  # last 12 months of deal arrays
    records: list = field(default_factory=list)
    transactions: list = field(default_factory=list)  # (step, TransactionLog)


def step_month(state: PopulationState, config: ScenarioConfig,
               rng: np.random.Generator, ctx: EngineContext) -> MonthRecord:
    """Advance one month in the contracted order: demographics, budgets,
    stats refresh, bids, listings, clearing/settlement, tenancy updates."""
    step = state.step
    recent = np.concatenate(ctx.recent_prices) if ctx.recent_prices else np.empty(0)
    apply_demographics(state, config, step, rng, recent)

    occ = owner_occupied_mask(state)
    flows = update_budget(state, config.external, occ)

    index = ctx.rsi.index()
    ctx.stats.delta_hpi = annual_change(index, step)
    ctx.stats.recent_prices = recent
    ctx.stats.median_deal = float(np.median(recent)) if recent.size else 0.0

    bidders, bid_prices, clamp_count = collect_bids(state, config, ctx.stats, step, rng)
    listings = collect_listings(state, config, ctx.stats, rng)
    log, void_count = clear(state, config, listings, bidders, bid_prices, step, rng)

    deal_prices = np.asarray(log.deal_price, dtype=float)
    ctx.rsi.add_sales(log.house, deal_prices, step)
    ctx.monthly_means.append(monthly_mean(deal_prices))
    ctx.recent_prices.append(deal_prices)
    if len(ctx.recent_prices) > 12:
        ctx.recent_prices.pop(0)
    if len(log):
        ctx.stats.sold_to_list = float(
            (deal_prices / np.asarray(log.list_price, dtype=float)).mean()
        )

    assign_tenancies(state, config, rng)
    sold = state.households.months_since_sale >= 0
    state.households.months_since_sale[sold] += 1
    state.step += 1

    record = MonthRecord(
        step=step,
        mean_price=ctx.monthly_means[-1],
        n_deals=len(log),
        n_bids=int(bidders.size),
        n_listings=int(listings.size),
        clamp_count=clamp_count,
        void_count=void_count,
        delta_hpi=ctx.stats.delta_hpi,
        sold_to_list=ctx.stats.sold_to_list,
        flows=flows,
        settlement_outlays=float(np.sum(log.buyer_outlay)),
        settlement_receipts=float(np.sum(log.seller_receipt)),
        wealth_end=float(state.households.wealth.sum()),
    )
    ctx.records.append(record)
    ctx.transactions.append((step, log))
    return record


@dataclass
class TrajectoryOutput:
    """Reported (calendar-period) series and logs of one run."""

    seed: tuple
    months: np.ndarray  # linear month indices
    mean_price: np.ndarray  # NaN on zero-deal months
    n_deals: np.ndarray
    moving_avg: np.ndarray  # 12-month trailing mean over calendar months
    index: np.ndarray  # repeat-sales index over calendar months
    delta_hpi: np.ndarray
    n_bids: np.ndarray
    n_listings: np.ndarray
    clamp_count: np.ndarray
    void_count: np.ndarray
    transactions: dict  # column arrays incl. month
    records: list  # full MonthRecord history (equilibration included)

    def summary(self) -> "TrajectorySummary":
        return TrajectorySummary(
            seed=self.seed,
            months=self.months,
            mean_price=self.mean_price,
            moving_avg=self.moving_avg,
            n_deals=self.n_deals,
            final_index=float(self.index[-1]),
            clamp_total=int(self.clamp_count.sum()),
            void_total=int(self.void_count.sum()),
        )


@dataclass
class TrajectorySummary:
    """Slim per-trajectory result carried across process boundaries."""

    seed: tuple
    months: np.ndarray
    mean_price: np.ndarray
    moving_avg: np.ndarray
    n_deals: np.ndarray
    final_index: float
    clamp_total: int
    void_total: int


def trajectory_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-trajectory stream, independent of execution order."""
    return np.random.SeedSequence(entropy=(int(master_seed), int(index)))


def run_trajectory(config: ScenarioConfig, seed) -> TrajectoryOutput:
    """Run equilibration plus calendar months and report the calendar slice."""
    config.validate()
    if isinstance(seed, np.random.SeedSequence):
        seed_id = tuple(np.atleast_1d(seed.entropy).tolist())
        rng = np.random.default_rng(seed)
    else:
        seed_id = (int(seed),)
        rng = np.random.default_rng(int(seed))

    state = synthesize_population(config, rng)
    ctx = EngineContext(config=config, rsi=RepeatSalesIndex(config.total_months))
    for _ in range(config.total_months):
        step_month(state, config, rng, ctx)

    equil = config.equilibration_months
    months = np.arange(config.calendar_start, config.calendar_end)
    means = np.asarray(ctx.monthly_means[equil:], dtype=float)
    index_full = ctx.rsi.index()
    calendar = ctx.records[equil:]

    tx_cols: dict[str, list] = {
        "month": [], "house": [], "buyer": [], "seller": [], "deal_price": [],
        "list_price": [], "months_on_market": [], "loan": [], "tax_paid": [],
        "discharged": [], "buyer_outlay": [], "seller_receipt": [],
    }
    for step, log in ctx.transactions[equil:]:
        month = config.calendar_start + (step - equil)
        tx_cols["month"].extend([month] * len(log))
        for name in tx_cols:
            if name != "month":
                tx_cols[name].extend(getattr(log, name))

    return TrajectoryOutput(
        seed=seed_id,
        months=months,
        mean_price=means,
        n_deals=np.array([r.n_deals for r in calendar]),
        moving_avg=moving_average(means, 12),
        index=index_full[equil:],
        delta_hpi=np.array([r.delta_hpi for r in calendar]),
        n_bids=np.array([r.n_bids for r in calendar]),
        n_listings=np.array([r.n_listings for r in calendar]),
        clamp_count=np.array([r.clamp_count for r in calendar]),
        void_count=np.array([r.void_count for r in calendar]),
        transactions={k: np.asarray(v) for k, v in tx_cols.items()},
        records=ctx.records,
    )


@dataclass
class EnsembleOutput:
    """Cross-trajectory statistics of the yearly moving average price."""

    master_seed: int
    months: np.ndarray
    ma_matrix: np.ndarray  # (n_trajectories, n_months)
    mean_matrix: np.ndarray
    quantiles: dict  # percentile -> per-month array
    final_cv: float
    start_values: np.ndarray
    end_values: np.ndarray
    member_seeds: list
    clamp_total: int
    void_total: int

    @property
    def n_trajectories(self) -> int:
        return self.ma_matrix.shape[0]

    @property
    def median_ma(self) -> np.ndarray:
        return self.quantiles[50]


_WORKER_CONFIG: ScenarioConfig | None = None


def _init_worker(config: ScenarioConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _run_member(args) -> TrajectorySummary:
    master_seed, index = args
    return run_trajectory(_WORKER_CONFIG, trajectory_seed(master_seed, index)).summary()


def run_ensemble(config: ScenarioConfig, n_trajectories: int, master_seed: int,
                 jobs: int = 1) -> EnsembleOutput:
    """Run an ensemble with per-member seed streams derived from the master
    seed; results do not depend on the degree of parallelism."""
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be at least 1")
    tasks = [(master_seed, i) for i in range(n_trajectories)]
    if jobs <= 1:
        summaries = [
            run_trajectory(config, trajectory_seed(master_seed, i)).summary()
            for _, i in tasks
        ]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(config,)
        ) as pool:
            chunk = max(1, n_trajectories // (4 * jobs))
            summaries = list(pool.map(_run_member, tasks, chunksize=chunk))
    return aggregate_ensemble(config, master_seed, summaries)


def aggregate_ensemble(config: ScenarioConfig, master_seed: int,
                       summaries: list) -> EnsembleOutput:
    ma = np.vstack([s.moving_avg for s in summaries])
    means = np.vstack([s.mean_price for s in summaries])
    quantiles = {q: np.nanpercentile(ma, q, axis=0) for q in QUANTILES}
    final = ma[:, -1]
    with np.errstate(invalid="ignore"):
        final_cv = float(np.nanstd(final) / np.nanmean(final))
    return EnsembleOutput(
        master_seed=master_seed,
        months=summaries[0].months,
        ma_matrix=ma,
        mean_matrix=means,
        quantiles=quantiles,
        final_cv=final_cv,
        start_values=_edge_values(ma, first=True),
        end_values=_edge_values(ma, first=False),
        member_seeds=[s.seed for s in summaries],
        clamp_total=sum(s.clamp_total for s in summaries),
        void_total=sum(s.void_total for s in summaries),
    )


def _edge_values(ma: np.ndarray, first: bool) -> np.ndarray:
    """First/last defined yearly moving average of each trajectory."""
    out = np.full(ma.shape[0], np.nan)
    for i, row in enumerate(ma):
        defined = np.nonzero(np.isfinite(row))[0]
        if defined.size:
            out[i] = row[defined[0] if first else defined[-1]]
    return out


def ensemble_stats(output: EnsembleOutput) -> dict:
    """Independence and dispersion summary of an ensemble."""
    start, end = output.start_values, output.end_values
    ok = np.isfinite(start) & np.isfinite(end)
    corr = None
    if ok.sum() >= 2 and np.std(start[ok]) > 0 and np.std(end[ok]) > 0:
        corr = float(np.corrcoef(start[ok], end[ok])[0, 1])
    width = output.quantiles[95] - output.quantiles[5]
    return {
        "n_trajectories": output.n_trajectories,
        "final_cv": output.final_cv,
        "start_end_correlation": corr,
        "mean_quantile_width": float(np.nanmean(width)),
        "clamp_total": output.clamp_total,
        "void_total": output.void_total,
    }
