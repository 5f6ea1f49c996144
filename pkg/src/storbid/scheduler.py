"""Multi-interval self-scheduling for price-taking and price-making storage.

Both problems share the feasible set: per-interval charge/discharge boxes, no
discharge at negative forecast prices, state-of-charge dynamics with optional
bounds, and a terminal state-of-charge equality. The taker maximizes
``sum(price * (p - b))``; the maker maximizes the concave
``sum((nominal - alpha*q) * q)`` with ``q = p - b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (AlphaSeries, DispatchProfile, KktCertificate, PriceKind, PriceSeries,
                   StorageSpec, StorbidError, check_lengths)
from .solver import ConvexProgram, SolveReport, SolveStatus, solve


class InfeasibleScheduleError(StorbidError):
    """The terminal state of charge cannot be reached."""


class SolverFailure(StorbidError):
    pass


@dataclass(frozen=True, eq=False)
class ScheduleProblem:
    forecast: PriceSeries
    spec: StorageSpec
    alpha: Optional[AlphaSeries] = None
    enforce_soc_bounds: bool = True
    enforce_negative_price_rule: bool = True
    # among equally profitable schedules prefer the least throughput
    tie_break: bool = True

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", AlphaSeries.zeros(len(self.forecast)))
        self.alpha.check_paired(self.forecast)

    @property
    def horizon(self) -> int:
        return len(self.forecast)

    @property
    def is_taker(self) -> bool:
        return not np.any(self.alpha.values > 0)


@dataclass(frozen=True, eq=False)
class ScheduleSolution:
    profile: DispatchProfile
    certificate: KktCertificate
    objective: float
    forecast_profit: float
    report: SolveReport
    # intervals whose discharge or charge was forced to zero to rule out
    # simultaneous dispatch; build_program(problem, *these) rebuilds the program
    no_discharge: Tuple[int, ...] = ()
    no_charge: Tuple[int, ...] = ()


def profit(profile: DispatchProfile, prices: PriceSeries) -> float:
    """Revenue at fixed prices: ``sum(price * (p - b))``."""
    check_lengths(profile.discharge, prices.values)
    return float(np.dot(prices.values, profile.net))


def profit_influenced(profile: DispatchProfile, nominal: PriceSeries, alpha: AlphaSeries) -> float:
    """Revenue when the unit's own output moves the price."""
    check_lengths(profile.discharge, nominal.values, alpha.values)
    q = profile.net
    return float(np.dot(nominal.values - alpha.values * q, q))


# ---------------------------------------------------------------------------

def _upper_bounds(problem: ScheduleProblem, no_discharge: Sequence[int] = (),
                  no_charge: Sequence[int] = ()):
    T = problem.horizon
    cap = problem.spec.interval_cap(problem.forecast.interval_hours)
    p_hi, b_hi = np.full(T, cap), np.full(T, cap)
    if problem.enforce_negative_price_rule:
        p_hi[problem.forecast.values < 0] = 0.0
    p_hi[list(no_discharge)] = 0.0
    b_hi[list(no_charge)] = 0.0
    return p_hi, b_hi


def build_program(problem: ScheduleProblem, no_discharge: Sequence[int] = (),
                  no_charge: Sequence[int] = ()):
    """Assemble the canonical program; variables are [p, b] or [p, b, q].

    ``no_discharge`` and ``no_charge`` list intervals whose discharge or
    charge is held at zero. Returns the program and the throughput vector
    used to break ties.
    """
    T = problem.horizon
    spec = problem.spec
    eta = spec.efficiency
    cap = spec.interval_cap(problem.forecast.interval_hours)
    lam = problem.forecast.values
    alpha = problem.alpha.values
    maker = not problem.is_taker
    nv = 3 * T if maker else 2 * T

    lower = np.zeros(nv)
    upper = np.full(nv, cap)
    upper[:T], upper[T:2 * T] = _upper_bounds(problem, no_discharge, no_charge)
    h = np.zeros(nv)
    c = np.zeros(nv)
    if maker:
        lower[2 * T:], upper[2 * T:] = -np.inf, np.inf
        h[2 * T:] = 2 * alpha
        c[2 * T:] = -lam
    else:
        c[:T] = -lam
        c[T:2 * T] = lam

    # withdrawn energy after interval t: sum_{s<=t} (p_s/eta - b_s*eta)
    cum = np.zeros((T, nv))
    for t in range(T):
        cum[t, :t + 1] = 1.0 / eta
        cum[t, T:T + t + 1] = -eta
    eq_rows = [cum[T - 1]]
    eq_rhs = [spec.soc_init - spec.terminal_target]
    if maker:
        link = np.zeros((T, nv))
        for t in range(T):
            link[t, 2 * T + t] = 1.0
            link[t, t] = -1.0
            link[t, T + t] = 1.0
        eq_rows.extend(link)
        eq_rhs.extend([0.0] * T)
    if problem.enforce_soc_bounds and T > 1:
        ineq = cum[:T - 1]
        ineq_lo = np.full(T - 1, spec.soc_init - spec.energy_cap)
        ineq_up = np.full(T - 1, spec.soc_init)
    else:
        ineq = np.zeros((0, nv))
        ineq_lo = ineq_up = np.zeros(0)

    prog = ConvexProgram(h, c, lower, upper, np.array(eq_rows), np.array(eq_rhs),
                         ineq, ineq_lo, ineq_up)
    throughput = np.zeros(nv)
    throughput[:2 * T] = 1.0
    return prog, throughput


def _certificate(problem: ScheduleProblem, p, b, report: SolveReport,
                 no_discharge: Sequence[int] = (), no_charge: Sequence[int] = ()) -> KktCertificate:
    """Map solver multipliers onto the storage KKT system and re-check it."""
    T = problem.horizon
    spec = problem.spec
    eta = spec.efficiency
    cap = spec.interval_cap(problem.forecast.interval_hours)
    lam = problem.forecast.values
    alpha = problem.alpha.values
    theta = float(report.eq_duals[0])
    # SoC rows bound withdrawn energy to [e0 - E, e0]: the lower side binds at
    # a full unit, the upper side at an empty one
    if report.ineq_lower_duals.size:
        soc_up = report.ineq_lower_duals.copy()
        soc_lo = report.ineq_upper_duals.copy()
    else:
        soc_lo = soc_up = np.zeros(max(T - 1, 0))
    # balance price seen by interval t includes every later SoC row
    tail = np.zeros(T)
    if soc_lo.size:
        tail[:T - 1] = np.cumsum((soc_up - soc_lo)[::-1])[::-1]
    theta_t = theta + tail

    nu_lo, nu_up = report.bound_lower_duals, report.bound_upper_duals
    d_minus, d_plus = nu_lo[:T].copy(), nu_up[:T].copy()
    b_minus, b_plus = nu_lo[T:2 * T].copy(), nu_up[T:2 * T].copy()
    q = p - b
    marginal = lam - 2 * alpha * q
    stat_p = marginal + theta_t / eta + d_minus - d_plus
    stat_b = -marginal - theta_t * eta + b_minus - b_plus
    stationarity = float(max(np.max(np.abs(stat_p)), np.max(np.abs(stat_b))))

    p_hi, b_hi = _upper_bounds(problem, no_discharge, no_charge)
    withdrawn = np.cumsum(p / eta - b * eta)
    soc = spec.soc_init - withdrawn
    primal = max(
        abs(soc[-1] - spec.terminal_target),
        float(np.max(np.maximum(-p, 0))), float(np.max(np.maximum(p - p_hi, 0))),
        float(np.max(np.maximum(-b, 0))), float(np.max(np.maximum(b - b_hi, 0))),
    )
    comp = [d_minus * p, d_plus * (p_hi - p), b_minus * b, b_plus * (b_hi - b)]
    if problem.enforce_soc_bounds and T > 1:
        primal = max(primal, float(np.max(np.maximum(soc[:-1] - spec.energy_cap, 0))),
                     float(np.max(np.maximum(-soc[:-1], 0))))
        comp += [soc_up * (spec.energy_cap - soc[:-1]), soc_lo * soc[:-1]]
    complementarity = float(max(np.max(np.abs(v)) for v in comp))
    duals = np.concatenate([d_minus, d_plus, b_minus, b_plus, soc_lo, soc_up])
    dual = float(np.max(np.maximum(-duals, 0.0), initial=0.0))
    return KktCertificate(theta, d_minus, d_plus, b_minus, b_plus,
                          stationarity, complementarity, primal, dual,
                          soc_lower=soc_lo, soc_upper=soc_up, theta_effective=theta_t)


def _simultaneous(x: np.ndarray, T: int, cap: float) -> Optional[int]:
    tol = 1e-9 * cap
    both = np.flatnonzero((x[:T] > tol) & (x[T:2 * T] > tol))
    return int(both[0]) if both.size else None


def _search(problem: ScheduleProblem):
    """Best schedule without simultaneous charge and discharge.

    The convex program allows both in one interval. That is never profitable
    for a taker that respects the negative-price rule, but a maker can gain by
    burning energy to keep its own output from moving the price. When the
    relaxed optimum does so, branch on the interval: either its discharge or
    its charge is zero. A branch's relaxed value bounds everything below it,
    so the depth-first search prunes and stays exact.
    """
    T = problem.horizon
    cap = problem.spec.interval_cap(problem.forecast.interval_hours)
    best = None
    root_infeasible = False
    stack = [((), ())]
    while stack:
        no_p, no_b = stack.pop()
        prog, tie = build_program(problem, no_p, no_b)
        report = solve(prog, tie_break=tie if problem.tie_break else None)
        if report.status is SolveStatus.INFEASIBLE:
            root_infeasible = root_infeasible or not (no_p or no_b)
            continue
        if report.status is not SolveStatus.OPTIMAL:
            raise SolverFailure(f"solver stopped with status {report.status.value}")
        if best is not None:
            slack = 1e-12 * max(1.0, abs(best[0].objective))
            if report.objective >= best[0].objective - slack:
                continue
        t = _simultaneous(report.primal, T, cap)
        if t is None:
            best = (report, no_p, no_b)
            continue
        # explored last-in first-out: the no-charge branch goes first
        stack.append((no_p + (t,), no_b))
        stack.append((no_p, tuple(sorted(no_b + (t,)))))
    if best is None:
        return None, root_infeasible
    return best, root_infeasible


def _solve(problem: ScheduleProblem) -> ScheduleSolution:
    T = problem.horizon
    spec = problem.spec
    cap = spec.interval_cap(problem.forecast.interval_hours)
    best, infeasible = _search(problem)
    if best is None:
        if not infeasible:
            raise SolverFailure("no branch produced a schedule")
        raise InfeasibleScheduleError(
            f"terminal state of charge {spec.terminal_target:g} MWh is unreachable "
            f"from {spec.soc_init:g} MWh in {T} intervals")
    report, no_p, no_b = best
    no_p, no_b = tuple(sorted(no_p)), tuple(sorted(no_b))
    x = report.primal
    # strip rounding noise at the bounds
    p = np.clip(x[:T], 0.0, cap)
    b = np.clip(x[T:2 * T], 0.0, cap)
    p[np.abs(p) < 1e-12 * cap] = 0.0
    b[np.abs(b) < 1e-12 * cap] = 0.0
    profile = DispatchProfile.from_decisions(p, b, spec, problem.forecast.interval_hours)
    cert = _certificate(problem, p, b, report, no_p, no_b)
    fc_profit = profit(profile, problem.forecast)
    if problem.is_taker:
        objective = fc_profit
    else:
        objective = profit_influenced(profile, problem.forecast, problem.alpha)
    return ScheduleSolution(profile, cert, objective, fc_profit, report, no_p, no_b)


def solve_taker(problem: ScheduleProblem) -> ScheduleSolution:
    """Profit-maximizing schedule at fixed forecast prices."""
    if not problem.is_taker:
        raise ValueError("a price taker has zero price sensitivity")
    return _solve(problem)


def solve_maker(problem: ScheduleProblem) -> ScheduleSolution:
    """Profit-maximizing schedule anticipating ``price = nominal - alpha*q``.

    With all-zero ``alpha`` this is the taker problem and returns the same
    schedule.
    """
    if problem.forecast.kind is PriceKind.REALIZED:
        raise ValueError("maker schedules are computed from nominal prices")
    return _solve(problem)


# ---------------------------------------------------------------------------
# closed-form two-interval policies (state of charge unconstrained)

def _two_interval_profile(p1, b1, p2, b2, spec: StorageSpec) -> DispatchProfile:
    return DispatchProfile.from_decisions([p1, p2], [b1, b2], spec)


def policy_two_interval_taker(l1: float, l2: float, spec: StorageSpec,
                              enforce_negative_price_rule: bool = False) -> DispatchProfile:
    """Price-taker decision for two intervals.

    Discharge ``P*eta**2`` in the dearer interval and charge ``P`` in the
    cheaper one when the spread beats the round-trip loss, otherwise idle.
    With ``enforce_negative_price_rule`` a negative price in the interval that
    would discharge makes the unit idle.
    """
    P, eta2 = spec.power_cap, spec.efficiency ** 2
    if l1 > l2 / eta2 and not (enforce_negative_price_rule and l1 < 0):
        return _two_interval_profile(P * eta2, 0.0, 0.0, P, spec)
    if l1 < l2 * eta2 and not (enforce_negative_price_rule and l2 < 0):
        return _two_interval_profile(0.0, P, P * eta2, 0.0, spec)
    return _two_interval_profile(0.0, 0.0, 0.0, 0.0, spec)


def policy_two_interval_maker(l1: float, l2: float, a1: float, a2: float, spec: StorageSpec,
                              enforce_negative_price_rule: bool = False) -> DispatchProfile:
    """Price-maker decision for two intervals at nominal prices ``l1, l2``.

    Each trading direction has a full-capacity branch and an interior branch
    where marginal revenue, including the unit's own price impact, balances
    across the two intervals.
    """
    if a1 < 0 or a2 < 0:
        raise ValueError("price sensitivity must be non-negative")
    P, eta = spec.power_cap, spec.efficiency
    eta2, eta4 = eta ** 2, eta ** 4
    if l1 > l2 / eta2 and not (enforce_negative_price_rule and l1 < 0):
        if l1 - 2 * a1 * P * eta2 >= (l2 + 2 * a2 * P) / eta2:
            return _two_interval_profile(P * eta2, 0.0, 0.0, P, spec)
        p1 = (l1 - l2 / eta2) / (2 * (a1 + a2 / eta4))
        return _two_interval_profile(p1, 0.0, 0.0, p1 / eta2, spec)
    if l1 < l2 * eta2 and not (enforce_negative_price_rule and l2 < 0):
        if (l1 + 2 * a1 * P) / eta2 <= l2 - 2 * a2 * P * eta2:
            return _two_interval_profile(0.0, P, P * eta2, 0.0, spec)
        b1 = (l2 * eta2 - l1) / (2 * (a1 + a2 * eta4))
        return _two_interval_profile(0.0, b1, b1 * eta2, 0.0, spec)
    return _two_interval_profile(0.0, 0.0, 0.0, 0.0, spec)


def check_corollary_condition(l_j1: float, l_j2: float, a_j1: float, a_j2: float,
                              spec: StorageSpec) -> bool:
    """Sufficient condition for the three-interval two-partial/one-full maker pattern.

    ``j1`` is the partially charging interval and ``j2`` the partially
    discharging, highest-price interval.
    """
    P, eta2 = spec.power_cap, spec.efficiency ** 2
    return bool((l_j1 + 2 * a_j1 * P) / eta2 > l_j2 - 2 * a_j2 * P)
