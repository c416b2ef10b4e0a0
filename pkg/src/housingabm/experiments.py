"""Calibration of the trend aptitude and alternative-history comparisons."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    MonthlySeries,
    ScenarioConfig,
    ScenarioError,
    format_year_month,
    parse_year_month,
)
from .engine import EnsembleOutput, ensemble_stats, run_ensemble
from .priceindex import moving_average

__all__ = [
    "ReferenceSeries",
    "CalibrationResult",
    "calibrate_h",
    "generate_reference",
    "alternative_history",
    "SWAP_FIELDS",
    "variability_report",
]


@dataclass(frozen=True)
class ReferenceSeries:
    """Observed mean monthly prices over the calendar window."""

    months: np.ndarray  # linear month indices, contiguous
    mean_price: np.ndarray

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceSeries":
        path = Path(path)
        if not path.is_file():
            raise ScenarioError(f"missing reference file {path}")
        months, values = [], []
        with path.open(newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or set(reader.fieldnames) != {"year_month", "mean_price"}:
                raise ScenarioError(f"{path}: expected columns year_month,mean_price")
            for row in reader:
                months.append(parse_year_month(row["year_month"]))
                values.append(float(row["mean_price"]))
        return cls(np.asarray(months), np.asarray(values, dtype=float))

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["year_month", "mean_price"])
            for month, value in zip(self.months, self.mean_price):
                writer.writerow([format_year_month(int(month)), repr(float(value))])

    def aligned_to(self, config: ScenarioConfig) -> np.ndarray:
        """Mean prices over the config's calendar months; raises on misalignment."""
        start, end = config.calendar_start, config.calendar_end
        if self.months[0] > start or self.months[-1] < end - 1:
            raise ScenarioError(
                "reference series does not cover the calendar window "
                f"{format_year_month(start)}..{format_year_month(end - 1)}"
            )
        offset = start - int(self.months[0])
        return self.mean_price[offset:offset + config.calendar_months]


@dataclass
class CalibrationResult:
    grid: np.ndarray
    distances: np.ndarray
    best_h: float
    medians: np.ndarray  # per-h ensemble median of the yearly moving average


def generate_reference(config: ScenarioConfig, n_trajectories: int,
                       master_seed: int, jobs: int = 1) -> ReferenceSeries:
    """Synthesize a reference series as the ensemble median of monthly means."""
    output = run_ensemble(config, n_trajectories, master_seed, jobs)
    return ReferenceSeries(
        months=output.months,
        mean_price=np.nanmedian(output.mean_matrix, axis=0),
    )


def calibrate_h(
    config: ScenarioConfig,
    reference: ReferenceSeries,
    h_grid,
    n_trajectories: int = 64,
    master_seed: int = 0,
    jobs: int = 1,
    common_random_numbers: bool = False,
) -> CalibrationResult:
    """Grid-search the trend aptitude by least squares against the reference.

    For each grid value, an ensemble is run and the per-month median of the
    yearly moving average is compared with the reference's yearly moving
    average; the argmin wins, ties breaking toward smaller magnitude.
    By default every grid point uses fresh seed streams.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size == 0:
        raise ValueError("h grid must be non-empty")
    ref_ma = moving_average(reference.aligned_to(config), 12)

    distances = np.empty(h_grid.size)
    medians = np.empty((h_grid.size, config.calendar_months))
    for gi, h in enumerate(h_grid):
        member_config = dataclasses.replace(config, trend_aptitude=float(h))
        seed = master_seed if common_random_numbers else _grid_seed(master_seed, gi)
        output = run_ensemble(member_config, n_trajectories, seed, jobs)
        median_ma = output.median_ma
        ok = np.isfinite(median_ma) & np.isfinite(ref_ma)
        distances[gi] = float(np.mean((median_ma[ok] - ref_ma[ok]) ** 2))
        medians[gi] = median_ma
    best = min(
        range(h_grid.size),
        key=lambda i: (distances[i], abs(h_grid[i]), h_grid[i]),
    )
    return CalibrationResult(
        grid=h_grid, distances=distances, best_h=float(h_grid[best]), medians=medians
    )


def _grid_seed(master_seed: int, grid_index: int) -> int:
    # Disjoint from plain master seeds used elsewhere; fresh per grid point.
    return int(np.random.SeedSequence((master_seed, 0x9E3779B9, grid_index)).generate_state(1)[0])


# Whitelisted parameter swaps; values are attribute paths or coupled groups.
SWAP_FIELDS = {
    "mortgage_rate_series": ("external.mortgage_rate_series",),
    "mortgage_income": ("external.mortgage_income_coeff", "external.mortgage_income_exponent"),
    "initial_price_mean": ("initial_price_mean",),
    "wealth_dist": ("wealth_dist",),
    "income_dist": ("income_dist",),
    "mortgage_dist": ("mortgage_dist",),
    "overseas_capacity_series": ("external.overseas_capacity_series",),
    "trend_aptitude": ("trend_aptitude",),
    "household_count_series": ("external.household_count_series",),
    "construction_series": ("external.construction_series",),
}


def alternative_history(base: ScenarioConfig, field: str,
                        donor: ScenarioConfig) -> ScenarioConfig:
    """Base scenario with exactly one whitelisted field taken from the donor."""
    if field not in SWAP_FIELDS:
        raise ScenarioError(
            f"unknown swap field {field!r}; choose one of {sorted(SWAP_FIELDS)}"
        )
    # Donor time series keep their shape but are re-anchored so that the
    # donor's calendar window lands on the base calendar window.
    shift = base.calendar_start - donor.calendar_start
    external_updates = {}
    top_updates = {}
    for path in SWAP_FIELDS[field]:
        if path.startswith("external."):
            attr = path.removeprefix("external.")
            value = getattr(donor.external, attr)
            if isinstance(value, MonthlySeries):
                value = MonthlySeries(value.start + shift, value.values)
            external_updates[attr] = value
        else:
            top_updates[path] = getattr(donor, path)
    if external_updates:
        top_updates["external"] = dataclasses.replace(base.external, **external_updates)
    variant = dataclasses.replace(base, **top_updates)
    variant.validate()
    return variant


def variability_report(ensembles: list[tuple[str, EnsembleOutput]]) -> list[dict]:
    """Comparison rows (one per named ensemble) of the dispersion metrics."""
    if len(ensembles) < 2:
        raise ValueError("need at least two ensembles to compare")
    rows = []
    for name, output in ensembles:
        stats = ensemble_stats(output)
        rows.append({
            "name": name,
            "n_trajectories": stats["n_trajectories"],
            "final_cv": stats["final_cv"],
            "mean_quantile_width": stats["mean_quantile_width"],
            "start_end_correlation": stats["start_end_correlation"],
        })
    return rows
