import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from storbid.bid_curve import (BidCurve, InfeasibleMarketError, QuadraticCost, RestOfSystem,
                               clear_single_interval, equivalent_withholding, figure_data,
                               influenced_price, optimal_bid_maker, optimal_bid_taker)

from oracles import bisect_clearing, grid_maker_quantity


def test_influenced_price():
    assert influenced_price(50, 1, 2) == 48
    assert influenced_price(50, 0, 2) == 50
    assert influenced_price(20, 1, -2.5) == 22.5
    with pytest.raises(ValueError):
        influenced_price(50, -1, 2)


@pytest.mark.parametrize("c2,c1,a,b", [(0.5, 10, 1, -10), (1, 0, 0.5, 0), (0.25, 20, 2, -40)])
def test_taker_bid(c2, c1, a, b):
    bid = optimal_bid_taker(QuadraticCost(c2, c1))
    assert bid.slope == pytest.approx(a) and bid.intercept == pytest.approx(b)


@pytest.mark.parametrize("c2,c1,alpha,a,b", [(0.5, 10, 0, 1, -10), (0.5, 10, 1, 0.5, -5),
                                             (0.25, 0, 0.5, 1, 0)])
def test_maker_bid(c2, c1, alpha, a, b):
    bid = optimal_bid_maker(QuadraticCost(c2, c1), alpha)
    assert bid.slope == pytest.approx(a) and bid.intercept == pytest.approx(b)


@pytest.mark.parametrize("nominal", [15.0, 30.0, 60.0])
def test_maker_bid_matches_grid_search(nominal):
    cost, alpha = QuadraticCost(0.5, 10), 1.0
    q = grid_maker_quantity(nominal, alpha, cost.c2, cost.c1, q_max=60)
    realized = nominal - alpha * q
    assert float(optimal_bid_maker(cost, alpha)(realized)) == pytest.approx(q, abs=1e-3)


def test_maker_bid_reduces_to_taker_exactly():
    cost = QuadraticCost(0.37, 12.5)
    assert optimal_bid_maker(cost, 0.0) == optimal_bid_taker(cost)


def test_clearing_examples():
    out = clear_single_interval(BidCurve(1, 0), RestOfSystem(BidCurve(1, 0), 10))
    assert (out.price, out.unit_quantity) == (5, 5)
    out = clear_single_interval(BidCurve(0.5, -5), RestOfSystem(BidCurve(1, 0), 10))
    assert out.price == pytest.approx(10) and out.unit_quantity == pytest.approx(0)
    out = clear_single_interval(BidCurve(1e-9, 0), RestOfSystem(BidCurve(2, -4), 10))
    assert out.price == pytest.approx(7, rel=1e-6) and out.unit_quantity < 1e-7


def test_clearing_rejects_negative_demand():
    with pytest.raises(InfeasibleMarketError):
        RestOfSystem(BidCurve(1, 0), -1)


def test_withholding_examples():
    taker, maker = BidCurve(1, -10), BidCurve(0.5, -5)
    assert equivalent_withholding(taker, taker, RestOfSystem(BidCurve(1, 0), 16)).withheld == 0
    out = equivalent_withholding(taker, maker, RestOfSystem(BidCurve(1, 0), 10))
    assert out.price == pytest.approx(10) and out.withheld == pytest.approx(0)
    out = equivalent_withholding(taker, maker, RestOfSystem(BidCurve(1, 0), 16))
    assert out.price == pytest.approx(14) and out.withheld == pytest.approx(2)


def test_withholding_large_alpha_limit():
    cost = QuadraticCost(0.5, 10)
    rest = RestOfSystem(BidCurve(1, 0), 16)
    out = equivalent_withholding(optimal_bid_taker(cost), optimal_bid_maker(cost, 1e9), rest)
    assert out.withheld == pytest.approx(float(optimal_bid_taker(cost)(out.price)), abs=1e-6)


@settings(max_examples=300, deadline=None)
@given(c2=st.floats(0.05, 3), c1=st.floats(0, 40), alpha=st.floats(0, 5),
       ra=st.floats(0.1, 5), rb=st.floats(-30, 30), demand=st.floats(0, 300))
def test_clearing_balances_and_matches_bisection(c2, c1, alpha, ra, rb, demand):
    unit = optimal_bid_maker(QuadraticCost(c2, c1), alpha)
    rest = RestOfSystem(BidCurve(ra, rb), demand)
    try:
        out = clear_single_interval(unit, rest)
    except InfeasibleMarketError:
        assume(False)
    supply = out.unit_quantity + float(rest.supply(out.price))
    assert abs(supply - demand) <= 1e-9 * max(demand, 1.0)
    if demand > 1e-6:
        ref = bisect_clearing([(unit.slope, unit.intercept), (ra, rb)], demand)
        assert out.price == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_figure_data_shapes():
    data = figure_data(QuadraticCost(0.5, 10), 1.0, RestOfSystem(BidCurve(1, 0), 16),
                       np.linspace(0, 30, 7))
    assert len(data["curves"]) == 7
    assert data["maker"].price >= data["taker"].price
    assert all(r["q_maker"] <= r["q_taker"] for r in data["curves"])
