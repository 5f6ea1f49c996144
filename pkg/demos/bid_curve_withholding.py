"""
Economic versus physical withholding in one interval
====================================================
"""
import numpy as np

from storbid.bid_curve import (BidCurve, QuadraticCost, RestOfSystem, clear_single_interval,
                               equivalent_withholding, figure_data, optimal_bid_maker,
                               optimal_bid_taker)

cost = QuadraticCost(c2=0.5, c1=10.0)
rest = RestOfSystem(BidCurve(1.0, 0.0), demand=16.0)

taker_bid = optimal_bid_taker(cost)
maker_bid = optimal_bid_maker(cost, alpha=1.0)

# %%
# The maker bid is steeper, so it clears at a higher price with less output.
t = clear_single_interval(taker_bid, rest)
m = equivalent_withholding(taker_bid, maker_bid, rest)
print(f"taker clears at {t.price:.3f} supplying {t.unit_quantity:.3f}")
print(f"maker clears at {m.price:.3f} supplying {m.unit_quantity:.3f}")
print(f"at that price the taker bid would offer {m.unit_quantity + m.withheld:.3f}: "
      f"{m.withheld:.3f} MWh held back")

# %%
# Supply schedules on a price grid, ready for plotting.
data = figure_data(cost, 1.0, rest, np.linspace(0, 30, 7))
for row in data["curves"]:
    print("{price:5.1f}  taker {q_taker:6.2f}  maker {q_maker:6.2f}  rest {q_rest:6.2f}".format(**row))
