"""Heterogeneous-agent simulation of a metropolitan housing market.

Households earn, consume, rent, borrow and trade dwellings month by month;
market-level prices emerge from bid/list matching and feed back into bids
through a repeat-sales price index.
"""

from .config import (
    BracketDistribution,
    ExternalParams,
    InternalParams,
    MonthlySeries,
    ScenarioConfig,
    ScenarioError,
    load_scenario,
    preset_path,
    save_scenario,
)
from .engine import (
    EnsembleOutput,
    TrajectoryOutput,
    ensemble_stats,
    run_ensemble,
    run_trajectory,
    trajectory_seed,
)
from .experiments import (
    ReferenceSeries,
    alternative_history,
    calibrate_h,
    generate_reference,
    variability_report,
)

__version__ = "0.1.0"

__all__ = [
    "BracketDistribution",
    "ExternalParams",
    "InternalParams",
    "MonthlySeries",
    "ScenarioConfig",
    "ScenarioError",
    "load_scenario",
    "save_scenario",
    "preset_path",
    "TrajectoryOutput",
    "EnsembleOutput",
    "run_trajectory",
    "run_ensemble",
    "ensemble_stats",
    "trajectory_seed",
    "ReferenceSeries",
    "calibrate_h",
    "generate_reference",
    "alternative_history",
    "variability_report",
    "__version__",
]
