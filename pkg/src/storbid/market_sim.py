"""Day-ahead scenario pipeline for a storage unit with and without market power.

Starting from a competitive benchmark price series the pipeline

1. schedules a price taker against the benchmark,
2. derives per-interval price sensitivities proportional to the benchmark,
3. reconstructs nominal prices (what would clear without the unit),
4. schedules a price maker against the nominal prices,
5. computes realized prices and profits, including a free-riding taker that
   schedules against the realized prices without moving them.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import (AlphaSeries, DispatchProfile, PriceKind, PriceSeries, StorageSpec,
                   StorbidError, check_lengths)
from .scheduler import (ScheduleProblem, profit, profit_influenced, solve_maker,
                        solve_taker)


class DegenerateAlphaError(StorbidError, ValueError):
    """Sensitivities cannot be scaled from a series with no positive price."""


class ScenarioLabel(Enum):
    NO_MARKET_POWER = "none"
    LOW_MARKET_POWER = "low"
    HIGH_MARKET_POWER = "high"
    CUSTOM = "custom"


# average sensitivity ($/MWh per MWh) of the standard scenarios
STANDARD_LEVELS: Dict[ScenarioLabel, float] = {
    ScenarioLabel.NO_MARKET_POWER: 0.0,
    ScenarioLabel.LOW_MARKET_POWER: 1.0,
    ScenarioLabel.HIGH_MARKET_POWER: 2.0,
}

# reference profits for one winter day of New York City day-ahead prices: (free-riding taker, maker)
REFERENCE_PROFITS: Dict[ScenarioLabel, tuple] = {
    ScenarioLabel.NO_MARKET_POWER: (37.95, None),
    ScenarioLabel.LOW_MARKET_POWER: (47.50, 42.02),
    ScenarioLabel.HIGH_MARKET_POWER: (66.66, 49.11),
}


@dataclass(frozen=True)
class ScenarioConfig:
    spec: StorageSpec
    alpha_level: float = 0.0
    label: ScenarioLabel = ScenarioLabel.CUSTOM
    period_length: int = 24

    def __post_init__(self):
        object.__setattr__(self, "label", ScenarioLabel(self.label))
        if not self.alpha_level >= 0:
            raise ValueError("alpha_level must be non-negative")
        if self.label is ScenarioLabel.NO_MARKET_POWER and self.alpha_level != 0:
            raise ValueError("the no-market-power scenario has zero sensitivity")
        if self.period_length < 1:
            raise ValueError("period_length must be at least 1")

    @classmethod
    def standard(cls, label, spec: StorageSpec, period_length: int = 24) -> "ScenarioConfig":
        label = ScenarioLabel(label)
        if label not in STANDARD_LEVELS:
            raise ValueError("custom scenarios need an explicit alpha_level")
        return cls(spec, STANDARD_LEVELS[label], label, period_length)


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    config: ScenarioConfig
    competitive: PriceSeries
    alpha: AlphaSeries
    nominal: PriceSeries
    realized: PriceSeries
    taker_profile: DispatchProfile
    maker_profile: Optional[DispatchProfile]
    free_rider_profile: DispatchProfile
    maker_profit: Optional[float]
    taker_profit: float
    withheld: np.ndarray

    @property
    def has_maker(self) -> bool:
        return self.maker_profile is not None


def build_alpha(competitive: PriceSeries, level: float) -> AlphaSeries:
    """Sensitivities proportional to the positive part of the benchmark, averaging ``level``."""
    if not level >= 0:
        raise ValueError("level must be non-negative")
    n = len(competitive)
    if level == 0:
        return AlphaSeries.zeros(n)
    base = np.maximum(competitive.values, 0.0)
    mean = float(np.mean(base))
    if not mean > 0:
        raise DegenerateAlphaError("no positive competitive price to scale sensitivities from")
    return AlphaSeries(level * base / mean)


def build_nominal(competitive: PriceSeries, alpha: AlphaSeries,
                  taker_profile: DispatchProfile) -> PriceSeries:
    """Prices without the unit: adding back the taker's net output recovers them."""
    check_lengths(competitive.values, alpha.values, taker_profile.discharge)
    values = competitive.values + alpha.values * taker_profile.net
    return competitive.with_kind(PriceKind.NOMINAL, values)


def realized_prices(nominal: PriceSeries, alpha: AlphaSeries,
                    profile: DispatchProfile) -> PriceSeries:
    check_lengths(nominal.values, alpha.values, profile.discharge)
    return nominal.with_kind(PriceKind.REALIZED, nominal.values - alpha.values * profile.net)


def _concat(parts: Sequence[DispatchProfile]) -> DispatchProfile:
    return DispatchProfile(np.concatenate([p.discharge for p in parts]),
                           np.concatenate([p.charge for p in parts]),
                           np.concatenate([p.soc for p in parts]),
                           parts[0].interval_hours)


def _periods(n: int, period_length: int) -> List[slice]:
    if n % period_length:
        raise ValueError(f"{n} intervals do not split into periods of {period_length}")
    return [slice(k, k + period_length) for k in range(0, n, period_length)]


def _schedule(prices: PriceSeries, spec: StorageSpec, periods: List[slice],
              alpha: Optional[AlphaSeries] = None) -> DispatchProfile:
    """Solve period by period, carrying the end state of charge forward."""
    parts = []
    period_spec = spec
    for sl in periods:
        sub = prices.with_kind(prices.kind, prices.values[sl])
        if alpha is None:
            sol = solve_taker(ScheduleProblem(sub, period_spec))
        else:
            sol = solve_maker(ScheduleProblem(sub, period_spec, AlphaSeries(alpha.values[sl])))
        parts.append(sol.profile)
        period_spec = StorageSpec(spec.power_cap, spec.energy_cap, spec.efficiency,
                                  spec.terminal_target, spec.soc_terminal)
    return _concat(parts)


def run_scenario(config: ScenarioConfig, competitive: PriceSeries) -> ScenarioResult:
    """Run the full taker / maker / free-rider pipeline on a benchmark series."""
    competitive = competitive.with_kind(PriceKind.COMPETITIVE)
    periods = _periods(len(competitive), config.period_length)
    taker = _schedule(competitive, config.spec, periods)
    alpha = build_alpha(competitive, config.alpha_level)
    nominal = build_nominal(competitive, alpha, taker)
    if config.alpha_level == 0:
        realized = competitive.with_kind(PriceKind.REALIZED)
        return ScenarioResult(config, competitive, alpha, nominal, realized, taker, None,
                              taker, None, profit(taker, competitive),
                              np.zeros(len(competitive)))
    maker = _schedule(nominal, config.spec, periods, alpha)
    realized = realized_prices(nominal, alpha, maker)
    maker_profit = profit_influenced(maker, nominal, alpha)
    # the free rider schedules against realized prices and does not move them
    free_rider = _schedule(realized.with_kind(PriceKind.FORECAST), config.spec, periods)
    return ScenarioResult(config, competitive, alpha, nominal, realized, taker, maker,
                          free_rider, maker_profit, profit(free_rider, realized),
                          taker.net - maker.net)


def run_standard(competitive: PriceSeries, spec: StorageSpec, period_length: int = 24,
                 labels: Sequence[ScenarioLabel] = tuple(STANDARD_LEVELS)) -> List[ScenarioResult]:
    return [run_scenario(ScenarioConfig.standard(lab, spec, period_length), competitive)
            for lab in labels]


def compare_reference(results: Sequence[ScenarioResult], tol: float = 0.05) -> List[dict]:
    """Set simulated profits beside the published ones (informational only)."""
    rows = []
    for res in results:
        ref = REFERENCE_PROFITS.get(res.config.label)
        if ref is None:
            continue
        ref_taker, ref_maker = ref
        row = {"scenario": res.config.label.value,
               "taker": res.taker_profit, "taker_reference": ref_taker,
               "maker": res.maker_profit, "maker_reference": ref_maker}
        ok = abs(res.taker_profit - ref_taker) <= tol
        if ref_maker is not None:
            ok = ok and res.maker_profit is not None and abs(res.maker_profit - ref_maker) <= tol
        row["within_tolerance"] = ok
        rows.append(row)
    return rows
