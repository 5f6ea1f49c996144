"""
Two-interval decisions for a taker and a maker
==============================================

A 2.5 MW unit with 90% one-way efficiency sees a dear hour and a cheap hour.
"""
import numpy as np

from storbid import AlphaSeries, PriceKind, PriceSeries, StorageSpec
from storbid.scheduler import (ScheduleProblem, policy_two_interval_maker,
                               policy_two_interval_taker, solve_maker)

spec = StorageSpec(power_cap=2.5, energy_cap=1000.0, efficiency=0.9, soc_init=500.0)

# %%
# The taker buys a full hour of charge and can only sell what survives the
# round trip, so the discharge hour is the partial one.
taker = policy_two_interval_taker(50, 20, spec)
print("taker  p =", taker.discharge, " b =", taker.charge)

# %%
# With price impact the maker stops short of full power once its own output
# erodes the spread.
for a in (0.0, 0.5, 2.0, 8.0):
    prof = policy_two_interval_maker(50, 20, a, a, spec)
    print(f"alpha={a:<4} p1={prof.discharge[0]:.4f}  b2={prof.charge[1]:.4f}")

# %%
# The general scheduler lands on the same point.
sol = solve_maker(ScheduleProblem(PriceSeries([50, 20], PriceKind.NOMINAL), spec,
                                  AlphaSeries([8.0, 8.0])))
print("solver p1 =", np.round(sol.profile.discharge[0], 6), " profit =", round(sol.objective, 4))
print("balance price theta =", round(sol.certificate.theta, 4))
