"""Optimal bidding, market simulation and withholding audits for energy storage."""
from .core import (AlphaSeries, DispatchProfile, IntervalClass, KktCertificate, PriceKind,
                   PriceSeries, SimultaneousDispatchError, StorageSpec, StorbidError, Violation,
                   classify_intervals, soc_trajectory, validate_profile)
from .bid_curve import (BidCurve, ClearingOutcome, InfeasibleMarketError, QuadraticCost,
                        RestOfSystem, clear_single_interval, equivalent_withholding,
                        influenced_price, optimal_bid_maker, optimal_bid_taker)
from .solver import ConvexProgram, SolveReport, SolveStatus, solve, verify_kkt
from .scheduler import (InfeasibleScheduleError, ScheduleProblem, ScheduleSolution,
                        check_corollary_condition, policy_two_interval_maker,
                        policy_two_interval_taker, profit, profit_influenced, solve_maker,
                        solve_taker)
from .market_sim import (ScenarioConfig, ScenarioLabel, ScenarioResult, build_alpha,
                         build_nominal, run_scenario, run_standard)
from .monitor import (AuditVerdict, Classification, ObservationWindow, audit,
                      check_condition1, check_condition2, count_withholding,
                      counterexample_catalogue, random_taker_window, segment)

__version__ = "0.1.0"
