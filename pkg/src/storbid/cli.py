"""Command-line entry point.

Exit codes: 0 success (or a clean audit), 1 computation error, 2 usage error,
3 audit not certified.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fileio
from .bid_curve import QuadraticCost, BidCurve, RestOfSystem, figure_data
from .core import AlphaSeries, PriceKind, StorageSpec, StorbidError
from .market_sim import STANDARD_LEVELS, ScenarioConfig, ScenarioLabel, build_alpha, run_scenario
from .monitor import PRICE_TOL, audit, counterexample_catalogue, random_taker_window
from .scheduler import (ScheduleProblem, policy_two_interval_maker, policy_two_interval_taker,
                        solve_maker, solve_taker)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_FLAGGED = 0, 1, 2, 3
TOL_ENV = "STORBID_TOL"


class UsageError(Exception):
    pass


def _add_storage(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("storage")
    g.add_argument("--config", type=Path, help="flat TOML or JSON run config")
    g.add_argument("--power-cap", type=float)
    g.add_argument("--energy-cap", type=float)
    g.add_argument("--efficiency", type=float)
    g.add_argument("--soc-init", type=float)
    g.add_argument("--soc-terminal", type=float)


def _run_config(args) -> fileio.RunConfig:
    data = {}
    base = Path(".")
    if getattr(args, "config", None) is not None:
        if not args.config.exists():
            raise UsageError(f"config file {args.config} does not exist")
        data = fileio.read_config_data(args.config)
        base = args.config.parent
    for key in ("power_cap", "energy_cap", "efficiency", "soc_init", "soc_terminal"):
        if getattr(args, key, None) is not None:
            data[key] = getattr(args, key)
    return fileio.config_from_dict(data, base)


def _prices_path(args, cfg: fileio.RunConfig) -> Path:
    path = args.prices or cfg.prices or fileio.bundled_prices_path()
    if not Path(path).exists():
        raise UsageError(f"price file {path} does not exist")
    return Path(path)


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------

def cmd_schedule(args) -> int:
    cfg = _run_config(args)
    level = args.alpha_level if args.alpha_level is not None else cfg.alpha_level
    path = _prices_path(args, cfg)
    if level > 0:
        prices = fileio.parse_price_csv(path, PriceKind.NOMINAL)
        alpha = build_alpha(prices.with_kind(PriceKind.COMPETITIVE), level)
        sol = solve_maker(ScheduleProblem(prices, cfg.storage, alpha))
    else:
        prices = fileio.parse_price_csv(path, PriceKind.FORECAST)
        alpha = AlphaSeries.zeros(len(prices))
        sol = solve_taker(ScheduleProblem(prices, cfg.storage))
    if args.format == "csv":
        if args.output is None:
            raise UsageError("--format csv needs --output")
        fileio.write_profile_csv(sol.profile, args.output)
        return EXIT_OK
    cert = sol.certificate
    doc = {
        "schema_version": fileio.SCHEMA_VERSION,
        "role": "maker" if level > 0 else "taker",
        "storage": fileio.spec_to_dict(cfg.storage),
        "prices": prices.values,
        "alpha": alpha.values,
        "objective": sol.objective,
        "forecast_profit": sol.forecast_profit,
        "profile": fileio.profile_to_dict(sol.profile),
        "certificate": {"theta": cert.theta, "max_residual": cert.max_residual,
                        "certified": cert.certified},
    }
    _emit(fileio.dumps(doc), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    prices = fileio.parse_price_csv(_prices_path(args, cfg))
    if args.level == "all":
        labels = list(STANDARD_LEVELS)
    else:
        by_level = {"0": ScenarioLabel.NO_MARKET_POWER, "1": ScenarioLabel.LOW_MARKET_POWER,
                    "2": ScenarioLabel.HIGH_MARKET_POWER}
        labels = [by_level[args.level]]
    period = args.period_length or cfg.period_length
    results = [run_scenario(ScenarioConfig.standard(lab, cfg.storage, period), prices)
               for lab in labels]
    out_dir = args.output_dir or cfg.output_dir
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for res in results:
            stem = f"scenario_{res.config.label.value}"
            fileio.write_json(fileio.scenario_to_dict(res), out_dir / f"{stem}.json")
            fileio.write_scenario_csv(res, out_dir / f"{stem}.csv")
        (out_dir / "profits.txt").write_text(fileio.profit_table(results), encoding="utf-8")
    sys.stdout.write(fileio.profit_table(results))
    return EXIT_OK


def _env_price_tol() -> Optional[float]:
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not value >= 0:
        raise UsageError(f"{TOL_ENV} must be non-negative")
    return value


def cmd_audit(args) -> int:
    cfg = _run_config(args)
    path = args.observations or cfg.observations
    if path is None:
        raise UsageError("audit needs --observations")
    if not Path(path).exists():
        raise UsageError(f"observation file {path} does not exist")
    period = args.period_length or cfg.period_length
    window = fileio.parse_observation_csv(path, cfg.storage, period)
    price_tol = next(v for v in (args.price_tol, _env_price_tol(), cfg.price_tol, PRICE_TOL)
                     if v is not None)
    class_tol = args.class_tol if args.class_tol is not None else cfg.class_tol
    verdict = audit(window, class_tol, price_tol)
    _emit(fileio.dumps(fileio.verdict_to_dict(verdict)), args.output)
    return EXIT_OK if verdict.clean else EXIT_FLAGGED


def cmd_bidcurve(args) -> int:
    cost = QuadraticCost(args.c2, args.c1)
    rest = RestOfSystem(BidCurve(args.rest_slope, args.rest_intercept), args.demand)
    prices = np.linspace(args.price_min, args.price_max, args.points)
    data = figure_data(cost, args.alpha, rest, prices)
    lines = ["kind,price,q_taker,q_maker,q_rest"]
    for row in data["curves"]:
        lines.append(",".join(["curve", fileio.fmt(row["price"]), fileio.fmt(row["q_taker"]),
                               fileio.fmt(row["q_maker"]), fileio.fmt(row["q_rest"])]))
    t, m = data["taker"], data["maker"]
    lines.append(",".join(["clearing_taker", fileio.fmt(t.price), fileio.fmt(t.unit_quantity),
                           "", fileio.fmt(t.rest_quantity)]))
    lines.append(",".join(["clearing_maker", fileio.fmt(m.price), "",
                           fileio.fmt(m.unit_quantity), fileio.fmt(m.rest_quantity)]))
    lines.append(",".join(["withheld", fileio.fmt(m.price), "", fileio.fmt(m.withheld), ""]))
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_policy(args) -> int:
    spec = StorageSpec(args.pbar, 4 * args.pbar, args.eta, 2 * args.pbar)
    if args.a1 or args.a2:
        prof = policy_two_interval_maker(args.l1, args.l2, args.a1, args.a2, spec,
                                         args.negative_price_rule)
    else:
        prof = policy_two_interval_taker(args.l1, args.l2, spec, args.negative_price_rule)
    vals = (prof.discharge[0], prof.charge[0], prof.discharge[1], prof.charge[1])
    sys.stdout.write("(" + ", ".join(f"{v:.12g}" for v in vals) + ")\n")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    cfg = _run_config(args)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for entry in counterexample_catalogue(cfg.storage, alpha=args.alpha):
        fileio.write_observation_csv(entry.taker, out / f"catalogue_{entry.name}_taker.csv")
        fileio.write_observation_csv(entry.maker, out / f"catalogue_{entry.name}_maker.csv")
    rng = np.random.default_rng(args.seed)
    for k in range(args.count):
        window = random_taker_window(rng, horizon=args.horizon)
        fileio.write_observation_csv(window, out / f"random_taker_{k:03d}.csv")
        fileio.write_json({"schema_version": fileio.SCHEMA_VERSION,
                           "storage": fileio.spec_to_dict(window.spec),
                           "period_length": window.period_length},
                          out / f"random_taker_{k:03d}.json")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storbid",
                                     description="Storage bidding, market simulation and audit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="optimal taker or maker schedule for a price file")
    _add_storage(p)
    p.add_argument("--prices", type=Path, help="price CSV (default: bundled synthetic day)")
    p.add_argument("--alpha-level", type=float,
                   help="average price sensitivity; > 0 schedules a price maker")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="taker / maker scenarios and profit table")
    _add_storage(p)
    p.add_argument("--prices", type=Path, help="competitive price CSV (default: bundled day)")
    p.add_argument("--level", choices=("0", "1", "2", "all"), default="all")
    p.add_argument("--period-length", type=int)
    p.add_argument("--output-dir", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="withholding audit of an observation CSV")
    _add_storage(p)
    p.add_argument("--observations", type=Path)
    p.add_argument("--period-length", type=int)
    p.add_argument("--price-tol", type=float)
    p.add_argument("--class-tol", type=float)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bidcurve", help="taker/maker supply curves and clearing points as CSV")
    p.add_argument("--c2", type=float, default=0.5)
    p.add_argument("--c1", type=float, default=10.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rest-slope", type=float, default=1.0)
    p.add_argument("--rest-intercept", type=float, default=0.0)
    p.add_argument("--demand", type=float, default=16.0)
    p.add_argument("--price-min", type=float, default=0.0)
    p.add_argument("--price-max", type=float, default=30.0)
    p.add_argument("--points", type=int, default=31)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_bidcurve)

    p = sub.add_parser("policy", help="closed-form two-interval decision (p1, b1, p2, b2)")
    p.add_argument("--l1", type=float, required=True)
    p.add_argument("--l2", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--pbar", type=float, default=2.5)
    p.add_argument("--a1", type=float, default=0.0)
    p.add_argument("--a2", type=float, default=0.0)
    p.add_argument("--negative-price-rule", action="store_true",
                   help="stay idle instead of discharging at a negative price")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("fixtures", help="write catalogue and random taker observation files")
    _add_storage(p)
    p.add_argument("--output-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--horizon", type=int, default=24)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_fixtures)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"storbid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StorbidError, ValueError, OSError) as exc:
        print(f"storbid: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
