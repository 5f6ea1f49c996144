"""
A day of trading with and without market power
===============================================

Runs the bundled 24-hour price series through the taker, maker and
free-riding taker pipeline at three sensitivity levels.
"""
import numpy as np

from storbid import StorageSpec, fileio
from storbid.market_sim import run_standard

prices = fileio.bundled_prices()
spec = StorageSpec(power_cap=2.5, energy_cap=10.0, efficiency=0.9, soc_init=5.0,
                   soc_terminal=5.0)
results = run_standard(prices, spec)

print(fileio.profit_table(results))

# %%
# Where the maker holds back discharge, prices end up above the benchmark;
# where it holds back charge, they end up below.
high = results[-1]
shift = high.realized.values - prices.values
for t in np.flatnonzero(np.abs(high.withheld) > 1e-9):
    print(f"hour {t:2d}  withheld {high.withheld[t]:+.3f} MWh  price shift {shift[t]:+.3f}")
