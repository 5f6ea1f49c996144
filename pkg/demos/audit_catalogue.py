"""
Auditing observed dispatch for withholding
==========================================
"""
import numpy as np

from storbid import StorageSpec
from storbid.monitor import audit, counterexample_catalogue, random_taker_window

spec = StorageSpec(power_cap=2.5, energy_cap=1000.0, efficiency=0.9, soc_init=500.0)

# %%
# Paired five-hour windows: an honest taker and a maker that withholds.
for entry in counterexample_catalogue(spec):
    t, m = audit(entry.taker), audit(entry.maker)
    rules = sorted({v.rule for v in m.violations})
    print(f"{entry.name:12s} taker {t.classification.value:26s} "
          f"maker {m.classification.value:16s} rules {rules}")

# %%
# Honest takers on random prices should never be flagged.
rng = np.random.default_rng(0)
flags = sum(not audit(random_taker_window(rng, horizon=24, periods=2)).clean for _ in range(100))
print("flagged random takers:", flags, "of 100")
