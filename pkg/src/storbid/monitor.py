"""Ex-post audit of observed storage dispatch for capacity withholding.

A window of ``N`` scheduling periods passes when

1. the number of withholding intervals (strictly inside the power bound) is
   at most the number of non-idle periods, and
2. inside every non-idle period the observed prices are consistent with the
   decisions of a price taker: full discharge at the dearest prices, full
   charge at the cheapest, partial output in between and idle intervals inside
   the round-trip loss band of the partial ones.

Passing certifies that the unit is not evidently exercising market power.
Failing is not proof of exercise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (AlphaSeries, DispatchProfile, IntervalClass, PriceKind, PriceSeries,
                   StorageSpec, classify_intervals, check_lengths)
from .scheduler import ScheduleProblem, solve_taker

PRICE_TOL = 1e-6

DF, DW = IntervalClass.DISCHARGE_FULL, IntervalClass.DISCHARGE_WITHHOLD
CF, CW = IntervalClass.CHARGE_FULL, IntervalClass.CHARGE_WITHHOLD
IDLE = IntervalClass.IDLE


@dataclass(frozen=True, eq=False)
class ObservationWindow:
    profile: DispatchProfile
    prices: PriceSeries
    spec: StorageSpec
    period_length: int

    def __post_init__(self):
        n = check_lengths(self.profile.discharge, self.prices.values)
        if self.period_length < 1 or n % self.period_length:
            raise ValueError(f"{n} intervals do not split into periods of {self.period_length}")

    @property
    def periods(self) -> int:
        return len(self.profile) // self.period_length


@dataclass(frozen=True, eq=False)
class PeriodView:
    index: int
    start: int
    classes: Tuple[IntervalClass, ...]
    prices: np.ndarray
    discharge: np.ndarray

    @property
    def idle(self) -> bool:
        return all(c is IDLE for c in self.classes)

    @property
    def withholding(self) -> int:
        return sum(c.is_withholding for c in self.classes)


@dataclass(frozen=True)
class RuleViolation:
    period: int
    first: int
    second: int
    rule: str
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {"period": self.period, "intervals": [self.first, self.second],
                "rule": self.rule, "lhs": self.lhs, "rhs": self.rhs}


@dataclass(frozen=True)
class Condition1Result:
    withholding_count: int
    nonidle_periods: int

    @property
    def passed(self) -> bool:
        return self.withholding_count <= self.nonidle_periods

    @property
    def margin(self) -> int:
        """Spare allowance; negative when the count exceeds it."""
        return self.nonidle_periods - self.withholding_count


@dataclass(frozen=True)
class Condition2Result:
    violations: Tuple[RuleViolation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations


class Classification(Enum):
    NOT_EVIDENTLY_EXERCISING = "not_evidently_exercising"
    NOT_CERTIFIED = "not_certified"


@dataclass(frozen=True)
class AuditVerdict:
    withholding_count: int
    nonidle_periods: int
    periods: int
    condition1: bool
    condition2: bool
    violations: Tuple[RuleViolation, ...] = field(default_factory=tuple)
    class_tol: float = 0.0
    price_tol: float = PRICE_TOL

    @property
    def classification(self) -> Classification:
        if self.condition1 and self.condition2:
            return Classification.NOT_EVIDENTLY_EXERCISING
        return Classification.NOT_CERTIFIED

    @property
    def clean(self) -> bool:
        return self.classification is Classification.NOT_EVIDENTLY_EXERCISING

    @property
    def margin(self) -> int:
        return self.nonidle_periods - self.withholding_count


def segment(window: ObservationWindow, tol: Optional[float] = None) -> List[PeriodView]:
    """Split the window into its scheduling periods and classify each interval."""
    classes = classify_intervals(window.profile, window.spec, tol)
    T = window.period_length
    return [PeriodView(k, k * T, tuple(classes[k * T:(k + 1) * T]),
                       window.prices.values[k * T:(k + 1) * T],
                       window.profile.discharge[k * T:(k + 1) * T])
            for k in range(window.periods)]


def count_withholding(window: ObservationWindow, tol: Optional[float] = None) -> int:
    return sum(v.withholding for v in segment(window, tol))


def check_condition1(window: ObservationWindow, tol: Optional[float] = None) -> Condition1Result:
    views = segment(window, tol)
    return Condition1Result(sum(v.withholding for v in views),
                            sum(not v.idle for v in views))


def _period_violations(view: PeriodView, eta2: float, eps: float) -> List[RuleViolation]:
    groups: Dict[IntervalClass, List[int]] = {c: [] for c in IntervalClass}
    for i, c in enumerate(view.classes):
        groups[c].append(i)
    lam = view.prices
    # an idle interval at a negative price could not have discharged anyway
    idle = [z for z in groups[IDLE] if not (lam[z] < 0 and view.discharge[z] <= 0)]
    # (rule, left interval group, right interval group, lhs(i, j), rhs(i, j))
    rules = [
        ("i.a", groups[DF], groups[DW], lambda x, u: lam[x], lambda x, u: lam[u]),
        ("i.b", groups[DF], groups[CW], lambda x, v: lam[x], lambda x, v: lam[v] / eta2),
        ("ii.a", groups[CF], groups[DW], lambda y, u: lam[u], lambda y, u: lam[y] / eta2),
        ("ii.b", groups[CF], groups[CW], lambda y, v: lam[v], lambda y, v: lam[y]),
        ("iii.a", idle, groups[DW], lambda z, u: lam[z] / eta2, lambda z, u: lam[u]),
        ("iii.b", idle, groups[DW], lambda z, u: lam[u], lambda z, u: lam[z]),
        ("iii.c", idle, groups[CW], lambda z, v: lam[z], lambda z, v: lam[v]),
        ("iii.d", idle, groups[CW], lambda z, v: lam[v], lambda z, v: lam[z] * eta2),
    ]
    out = []
    for rule, left, right, lhs, rhs in rules:
        for i in left:
            for j in right:
                a, b = float(lhs(i, j)), float(rhs(i, j))
                if not a > b - eps:
                    out.append(RuleViolation(view.index, view.start + i, view.start + j,
                                             rule, a, b))
    return out


def check_condition2(window: ObservationWindow, tol: Optional[float] = None,
                     price_tol: float = PRICE_TOL) -> Condition2Result:
    """Check every price/decision inequality inside each non-idle period.

    A strict inequality ``lhs > rhs`` is accepted when ``lhs > rhs - price_tol``.
    """
    if not price_tol >= 0:
        raise ValueError("price_tol must be non-negative")
    eta2 = window.spec.efficiency ** 2
    found: List[RuleViolation] = []
    for view in segment(window, tol):
        if not view.idle:
            found.extend(_period_violations(view, eta2, price_tol))
    return Condition2Result(tuple(found))


def audit(window: ObservationWindow, tol: Optional[float] = None,
          price_tol: float = PRICE_TOL) -> AuditVerdict:
    """Run both checks; the verdict is clean only if both pass."""
    c1 = check_condition1(window, tol)
    c2 = check_condition2(window, tol, price_tol)
    cap = window.spec.interval_cap(window.profile.interval_hours)
    return AuditVerdict(c1.withholding_count, c1.nonidle_periods, window.periods,
                        c1.passed, c2.passed, c2.violations,
                        class_tol=1e-6 * cap if tol is None else tol, price_tol=price_tol)


# ---------------------------------------------------------------------------
# fixtures

@dataclass(frozen=True, eq=False)
class CatalogueEntry:
    name: str
    taker: ObservationWindow
    maker: ObservationWindow
    alpha: AlphaSeries


# Decision codes over five intervals: D/C full discharge/charge, d/c partial,
# 0 idle. Each scenario lists the taker pattern and the one-partial maker
# patterns that raise the maker's profit relative to it.
_CATALOGUE_PATTERNS: Sequence[Tuple[str, str, str]] = (
    ("b_downgrade", "DDcCC", "Dd0CC"),
    ("p_downgrade", "DDdCC", "DD0cC"),
    ("b_upgrade", "DDccC", "DDcCC"),
    ("p_upgrade", "DddCC", "DDdCC"),
    ("b_switch_1", "DD0cC", "DD0Cc"),
    ("b_switch_2", "DD0cC", "DDc0C"),
    ("b_switch_3", "DD0cC", "DDCc0"),
    ("p_switch_1", "Dd0CC", "dD0CC"),
    ("p_switch_2", "Dd0CC", "D0dCC"),
    ("p_switch_3", "Dd0CC", "0dDCC"),
)


def _decode(pattern: str, cap: float, p_hat: float, b_hat: float):
    p = np.array([{"D": cap, "d": p_hat}.get(ch, 0.0) for ch in pattern])
    b = np.array([{"C": cap, "c": b_hat}.get(ch, 0.0) for ch in pattern])
    return p, b


def _taker_prices(pattern: str, eta2: float, level: float) -> np.ndarray:
    """Prices that make ``pattern`` strictly consistent for a price taker.

    Relative to the price ``m`` of the partial interval(s): full discharge
    above the band, full charge below it, idle inside it.
    """
    m = level
    if "c" in pattern:
        hi, lo = m / eta2, m
    else:
        hi, lo = m, m * eta2
    out = np.empty(len(pattern))
    n_dis = n_chg = 0
    for i, ch in enumerate(pattern):
        if ch in "dc":
            out[i] = m
        elif ch == "D":
            n_dis += 1
            out[i] = hi * (1.0 + 0.2 * n_dis)
        elif ch == "C":
            n_chg += 1
            out[i] = lo * (1.0 - 0.15 * n_chg)
        else:
            out[i] = 0.5 * (hi + lo)
    return out


def counterexample_catalogue(spec: StorageSpec, alpha: float = 1.0, price_level: float = 100.0,
                             withheld_discharge: float = 0.6,
                             withheld_charge: float = 0.4) -> List[CatalogueEntry]:
    """Paired taker/maker windows for one-interval withholding with market power.

    Partial outputs are ``withheld_* * power_cap``. The maker window carries
    the prices its own decisions produce: taker prices shifted by
    ``alpha * (q_taker - q_maker)``. The fixtures are not energy balanced.
    """
    if spec.efficiency >= 1:
        raise ValueError("idle taker intervals need a round-trip loss (efficiency < 1)")
    if not alpha >= 0:
        raise ValueError("alpha must be non-negative")
    cap = spec.interval_cap()
    p_hat, b_hat = withheld_discharge * cap, withheld_charge * cap
    if not (0 < p_hat < cap and 0 < b_hat < cap):
        raise ValueError("withheld fractions must lie strictly between 0 and 1")
    eta2 = spec.efficiency ** 2
    entries = []
    for name, taker_pat, maker_pat in _CATALOGUE_PATTERNS:
        tp, tb = _decode(taker_pat, cap, p_hat, b_hat)
        mp, mb = _decode(maker_pat, cap, p_hat, b_hat)
        lam_c = _taker_prices(taker_pat, eta2, price_level)
        a = AlphaSeries(np.full(5, alpha))
        lam_m = lam_c + a.values * ((tp - tb) - (mp - mb))
        taker = ObservationWindow(DispatchProfile.from_decisions(tp, tb, spec),
                                  PriceSeries(lam_c, PriceKind.REALIZED), spec, 5)
        maker = ObservationWindow(DispatchProfile.from_decisions(mp, mb, spec),
                                  PriceSeries(lam_m, PriceKind.REALIZED), spec, 5)
        entries.append(CatalogueEntry(name, taker, maker, a))
    return entries


RANDOM_EFFICIENCIES = (0.8, 0.85, 0.9, 0.95)


def random_taker_window(rng: np.random.Generator, horizon: int = 24, periods: int = 1,
                        power_cap: float = 2.5, price_range: Tuple[float, float] = (5.0, 100.0),
                        efficiency: Optional[float] = None) -> ObservationWindow:
    """Honest taker dispatch against random positive prices with slack energy capacity."""
    if efficiency is None:
        efficiency = float(rng.choice(RANDOM_EFFICIENCIES))
    energy = 2.0 * horizon * power_cap
    spec = StorageSpec(power_cap, energy, efficiency, energy / 2)
    prices = rng.uniform(*price_range, size=horizon * periods)
    parts = []
    for k in range(periods):
        sub = PriceSeries(prices[k * horizon:(k + 1) * horizon], PriceKind.FORECAST)
        parts.append(solve_taker(ScheduleProblem(sub, spec)).profile)
    profile = DispatchProfile(np.concatenate([q.discharge for q in parts]),
                              np.concatenate([q.charge for q in parts]),
                              np.concatenate([q.soc for q in parts]))
    return ObservationWindow(profile, PriceSeries(prices, PriceKind.REALIZED), spec, horizon)
