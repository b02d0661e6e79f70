"""
Stopping on the spot local time
===============================

How long should one wait to collect the local time of Brownian motion at
its current level?  Stopping at the horizon is worth sqrt(2T/pi); the
strategies below do better.
"""

import numpy as np

from occflow.stopping import (
    analytic_euro_value,
    eps_sweep,
    inspection_value,
    lsmc_value,
    two_date_value,
)

print(f"stop at T=1: {analytic_euro_value(1.0):.4f}")

# %%
# Two exercise dates: stop at t=0.5 when the accrued local time beats the
# closed-form continuation value.
print(two_date_value(T=1.0, t=0.5, N=400, eps=0.05, J=2**14, seed=0))

# %%
# Inspection strategy: at the date iota, pick the level with the most local
# time so far and stop when the path comes back to it.
for iota in (0.5, 0.7, 0.9):
    print(f"iota={iota}:", inspection_value(iota, T=1.0, N=400, eps=0.05, J=2**14, seed=0))

# %%
# Regression Monte Carlo on a trinomial lattice, with the local times at
# the 2*mbar+1 nodes around the spot as features.  Smaller sizes than the
# full experiment keep this demo quick.
for mbar in (0, 2):
    r = lsmc_value(mbar, N=200, J_off=2**10, J_on=2**13, seed=0)
    print(f"mbar={mbar}: {r}, in-sample {r.extras['offline_value']:.4f}")

# %%
# Narrow corridors reward precise returns, so values grow as eps shrinks.
eps = [0.02, 0.05, 0.1, 0.2]
for e, r in zip(eps, eps_sweep("inspection", eps, J=2**13, seed=0)):
    print(f"eps={e}: {r.value:.4f} +/- {r.stderr:.4f}")
