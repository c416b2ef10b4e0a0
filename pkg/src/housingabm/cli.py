"""Command-line interface: batch runs, ensembles, calibration and what-ifs.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, ScenarioError, format_year_month, load_scenario
from .engine import EnsembleOutput, TrajectoryOutput, ensemble_stats, run_ensemble, run_trajectory
from .experiments import (
    ReferenceSeries,
    alternative_history,
    calibrate_h,
    generate_reference,
    variability_report,
)

USAGE_EXIT = 1
VALIDATION_EXIT = 2
RUNTIME_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="housingabm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--households", type=int, default=None,
                       help="override simulated household count (rescales the scale factor)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a scalar config field")

    p_run = sub.add_parser("run", help="run a single trajectory")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    common(p_run)

    p_ens = sub.add_parser("ensemble", help="run an ensemble of trajectories")
    p_ens.add_argument("--scenario", required=True)
    p_ens.add_argument("--n", type=int, default=1000)
    p_ens.add_argument("--seed", type=int, default=0)
    p_ens.add_argument("--jobs", type=int, default=1)
    common(p_ens)

    p_cal = sub.add_parser("calibrate", help="grid-search the trend aptitude")
    p_cal.add_argument("--scenario", required=True)
    p_cal.add_argument("--reference", required=True, help="reference series CSV")
    p_cal.add_argument("--grid", required=True, help="lo:hi:step, e.g. -0.2:0.8:0.05")
    p_cal.add_argument("--n", type=int, default=64)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--jobs", type=int, default=1)
    common(p_cal)

    p_what = sub.add_parser("whatif", help="swap one parameter from a donor scenario")
    p_what.add_argument("--scenario", required=True, help="base scenario")
    p_what.add_argument("--field", required=True)
    p_what.add_argument("--donor", required=True, help="donor scenario")
    p_what.add_argument("--n", type=int, default=100)
    p_what.add_argument("--seed", type=int, default=0)
    p_what.add_argument("--jobs", type=int, default=1)
    common(p_what)

    p_ref = sub.add_parser("make-reference",
                           help="synthesize a reference series from the engine")
    p_ref.add_argument("--scenario", required=True)
    p_ref.add_argument("--n", type=int, default=16)
    p_ref.add_argument("--seed", type=int, default=0)
    p_ref.add_argument("--jobs", type=int, default=1)
    common(p_ref)

    return parser


def apply_overrides(config: ScenarioConfig, pairs: list[str],
                    households: int | None) -> ScenarioConfig:
    updates = {}
    external_updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ScenarioError(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        target, attr = (config, key)
        if key.startswith("external."):
            target, attr = (config.external, key.removeprefix("external."))
        if not hasattr(target, attr):
            raise ScenarioError(f"unknown config field {key!r}")
        current = getattr(target, attr)
        if isinstance(current, bool) or not isinstance(current, (int, float, str)):
            raise ScenarioError(f"field {key!r} is not an overridable scalar")
        value: int | float | str
        if isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        if target is config:
            updates[attr] = value
        else:
            external_updates[attr] = value
    if external_updates:
        updates["external"] = dataclasses.replace(config.external, **external_updates)
    if households is not None:
        real = config.external.household_count_series.at(config.calendar_start)
        updates["n_sim_households"] = households
        updates["scale_factor"] = real / households
    if updates:
        config = dataclasses.replace(config, **updates)
        config.validate()
    return config


def write_manifest(out: Path, args: argparse.Namespace) -> None:
    manifest = {
        "tool": "housingabm",
        "version": __version__,
        "command": args.command,
        "arguments": {
            k: v for k, v in vars(args).items() if k != "command"
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def write_trajectory(out: Path, result: TrajectoryOutput) -> None:
    with (out / "prices.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year_month", "mean_price", "moving_avg", "index",
                         "delta_hpi", "n_deals"])
        for i, month in enumerate(result.months):
            writer.writerow([
                format_year_month(int(month)),
                _fmt(result.mean_price[i]),
                _fmt(result.moving_avg[i]),
                _fmt(result.index[i]),
                _fmt(result.delta_hpi[i]),
                int(result.n_deals[i]),
            ])
    tx = result.transactions
    with (out / "transactions.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["month", "house_id", "buyer", "seller", "deal_price",
                         "list_price", "months_on_market"])
        for i in range(tx["month"].size):
            writer.writerow([
                format_year_month(int(tx["month"][i])),
                int(tx["house"][i]), int(tx["buyer"][i]), int(tx["seller"][i]),
                _fmt(tx["deal_price"][i]), _fmt(tx["list_price"][i]),
                int(tx["months_on_market"][i]),
            ])


def write_ensemble(out: Path, output: EnsembleOutput) -> None:
    with (out / "ensemble.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year_month", "q5", "q25", "median", "q75", "q95"])
        for i, month in enumerate(output.months):
            writer.writerow(
                [format_year_month(int(month))]
                + [_fmt(output.quantiles[q][i]) for q in (5, 25, 50, 75, 95)]
            )
    summary = ensemble_stats(output)
    summary["master_seed"] = output.master_seed
    summary["member_seeds"] = [list(s) for s in output.member_seeds]
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def _fmt(value) -> str:
    value = float(value)
    return "" if not np.isfinite(value) else repr(value)


def parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ScenarioError(f"bad grid {text!r}, expected lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise ScenarioError(f"bad grid {text!r}: need step > 0 and hi >= lo")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def _load(args) -> ScenarioConfig:
    config = load_scenario(args.scenario)
    return apply_overrides(config, args.overrides, args.households)


def cmd_run(args) -> None:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_trajectory(config, args.seed)
    write_trajectory(out, result)
    write_manifest(out, args)
    print(f"wrote {out}/prices.csv ({result.months.size} months, "
          f"{result.transactions['month'].size} transactions)")


def cmd_ensemble(args) -> None:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    output = run_ensemble(config, args.n, args.seed, args.jobs)
    write_ensemble(out, output)
    write_manifest(out, args)
    print(f"wrote {out}/ensemble.csv ({output.n_trajectories} trajectories)")


def cmd_calibrate(args) -> None:
    config = _load(args)
    grid = parse_grid(args.grid)
    reference = ReferenceSeries.load(args.reference)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = calibrate_h(config, reference, grid, n_trajectories=args.n,
                         master_seed=args.seed, jobs=args.jobs)
    report = {
        "grid": result.grid.tolist(),
        "distances": result.distances.tolist(),
        "best_h": result.best_h,
    }
    (out / "calibration.json").write_text(json.dumps(report, indent=2) + "\n")
    with (out / "medians.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["h"] + [format_year_month(int(m))
                                 for m in range(config.calendar_start, config.calendar_end)])
        for h, row in zip(result.grid, result.medians):
            writer.writerow([repr(float(h))] + [_fmt(v) for v in row])
    write_manifest(out, args)
    print(f"best h = {result.best_h}")


def cmd_whatif(args) -> None:
    base = _load(args)
    donor = load_scenario(args.donor)
    variant = alternative_history(base, args.field, donor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base_out = run_ensemble(base, args.n, args.seed, args.jobs)
    variant_out = run_ensemble(variant, args.n, args.seed, args.jobs)
    rows = variability_report([("baseline", base_out), (args.field, variant_out)])
    with (out / "variability.csv").open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    (out / "variability.json").write_text(json.dumps(rows, indent=2) + "\n")
    write_ensemble(out, variant_out)
    write_manifest(out, args)
    print(f"wrote {out}/variability.csv")


def cmd_make_reference(args) -> None:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reference = generate_reference(config, args.n, args.seed, args.jobs)
    reference.save(out / "reference.csv")
    write_manifest(out, args)
    print(f"wrote {out}/reference.csv")


_COMMANDS = {
    "run": cmd_run,
    "ensemble": cmd_ensemble,
    "calibrate": cmd_calibrate,
    "whatif": cmd_whatif,
    "make-reference": cmd_make_reference,
}


def main(argv=None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        sys.exit(VALIDATION_EXIT)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        sys.exit(RUNTIME_EXIT)


if __name__ == "__main__":
    main()
