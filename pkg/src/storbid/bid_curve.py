"""Single-interval affine supply functions and market clearing.

A participant with quadratic cost ``C(q) = c2*q**2 + c1*q`` bids an affine
supply function ``q(price) = slope*price + intercept`` (clamped at zero).
A price maker anticipates ``price = nominal - alpha*q`` and therefore bids a
flatter curve; against an inelastic demand this raises the clearing price
exactly as if the unit had physically held back ``withheld`` MWh.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .core import StorbidError


class InfeasibleMarketError(StorbidError, ValueError):
    """No non-negative supply can meet the stated demand."""


@dataclass(frozen=True)
class QuadraticCost:
    c2: float
    c1: float = 0.0

    def __post_init__(self):
        if not self.c2 > 0:
            raise ValueError("cost curvature c2 must be positive")

    def __call__(self, q):
        return self.c2 * np.square(q) + self.c1 * np.asarray(q)

    def marginal(self, q):
        return 2 * self.c2 * np.asarray(q) + self.c1


@dataclass(frozen=True)
class BidCurve:
    slope: float
    intercept: float = 0.0

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("bid slope must be positive")

    def raw(self, price):
        return self.slope * np.asarray(price, dtype=float) + self.intercept

    def __call__(self, price):
        """Offered quantity at ``price``, never negative."""
        return np.maximum(self.raw(price), 0.0)

    def price_at(self, quantity: float) -> float:
        return (quantity - self.intercept) / self.slope


@dataclass(frozen=True)
class RestOfSystem:
    supply: BidCurve
    demand: float

    def __post_init__(self):
        if self.demand < 0:
            raise InfeasibleMarketError("cleared demand must be non-negative")


@dataclass(frozen=True)
class ClearingOutcome:
    price: float
    unit_quantity: float
    rest_quantity: float
    withheld: float = 0.0


def influenced_price(nominal, alpha, q):
    """Price after the participant's net output ``q``: ``nominal - alpha*q``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0):
        raise ValueError("price sensitivity must be non-negative")
    out = np.asarray(nominal, dtype=float) - alpha * np.asarray(q, dtype=float)
    return float(out) if out.ndim == 0 else out


def optimal_bid_taker(cost: QuadraticCost) -> BidCurve:
    """Marginal-cost bid: maximizes ``price*q - C(q)`` for every price."""
    return BidCurve(1.0 / (2 * cost.c2), -cost.c1 / (2 * cost.c2))


def optimal_bid_maker(cost: QuadraticCost, alpha: float) -> BidCurve:
    """Bid of a unit that anticipates ``price = nominal - alpha*q``.

    Stationarity of ``(nominal - alpha*q)*q - C(q)`` written in the realized
    price gives ``price - c1 = (alpha + 2*c2)*q``.
    """
    if alpha < 0:
        raise ValueError("price sensitivity must be non-negative")
    denom = alpha + 2 * cost.c2
    return BidCurve(1.0 / denom, -cost.c1 / denom)


def clear_single_interval(unit: BidCurve, rest: RestOfSystem) -> ClearingOutcome:
    """Find the price where unit plus rest-of-system supply meets demand."""
    curves = (unit, rest.supply)
    # total supply is piecewise linear and nondecreasing; try each active set
    # from largest to smallest and keep the first self-consistent one
    for active in ((0, 1), (1,), (0,)):
        slope = sum(curves[i].slope for i in active)
        intercept = sum(curves[i].intercept for i in active)
        price = (rest.demand - intercept) / slope
        raw = [float(c.raw(price)) for c in curves]
        ok = all((raw[i] >= -1e-12) == (i in active) for i in range(2))
        if ok:
            q_unit = max(raw[0], 0.0) if 0 in active else 0.0
            q_rest = max(raw[1], 0.0) if 1 in active else 0.0
            return ClearingOutcome(float(price), q_unit, q_rest)
    raise InfeasibleMarketError(f"no clearing price for demand {rest.demand:g}")


def equivalent_withholding(taker: BidCurve, maker: BidCurve, rest: RestOfSystem) -> ClearingOutcome:
    """Clear against the maker bid and report the physical-equivalent shortfall.

    ``withheld`` is what the taker bid would have supplied at the maker's
    clearing price minus what the maker bid actually supplies.
    """
    out = clear_single_interval(maker, rest)
    withheld = float(taker(out.price)) - out.unit_quantity
    return ClearingOutcome(out.price, out.unit_quantity, out.rest_quantity, withheld)


def figure_data(cost: QuadraticCost, alpha: float, rest: RestOfSystem,
                prices: np.ndarray) -> Dict[str, object]:
    """Curves and clearing points for plotting taker vs maker bids."""
    taker = optimal_bid_taker(cost)
    maker = optimal_bid_maker(cost, alpha)
    taker_out = clear_single_interval(taker, rest)
    maker_out = equivalent_withholding(taker, maker, rest)
    rows: List[Dict[str, float]] = []
    for lam in prices:
        rows.append({
            "price": float(lam),
            "q_taker": float(taker(lam)),
            "q_maker": float(maker(lam)),
            "q_rest": float(rest.supply(lam)),
        })
    return {"curves": rows, "taker": taker_out, "maker": maker_out,
            "taker_bid": taker, "maker_bid": maker}
