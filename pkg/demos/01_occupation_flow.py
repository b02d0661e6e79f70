"""
Occupation flows of a simulated path
====================================

A price path is enlarged with its occupation flow: how much clock time it
has spent at each price level.  This walks through the three clocks, local
times and the fact that a time-shuffled path has the same calendar
occupation.
"""

import numpy as np

from occflow.occupation import (
    Clock,
    TimePermutation,
    local_time,
    make_grid,
    occupation_from_path,
    shuffle_path,
    support_bounds,
)
from occflow.sde import ConstantVol, SimConfig, euler_occupied

# %%
# One geometric Brownian path on 250 daily steps, with every clock recorded.
grid = make_grid(100.0, 30.0, 61)
cfg = SimConfig(horizon=1.0, n_steps=250, n_paths=1, seed=42, x0=100.0, grid=grid)
ens = euler_occupied(cfg, ConstantVol(0.2), record=("quadratic", Clock.exponential(12.0)))
path = ens.path(0)

for name, occ in path.occupations.items():
    print(f"{name:>16}: total mass {float(occ.total_mass):.4f}")

# %%
# The calendar mass is the horizon, the quadratic mass the realized variance
# (0.2**2 here), and the exponential clock weights the last weeks most.
calendar = path.occupations["calendar"]
lo, hi = support_bounds(calendar)
print(f"range visited: [{lo:.2f}, {hi:.2f}]")
print(f"time-average level: {float(calendar.first_moment / calendar.total_mass):.3f}")

# %%
# Local time: corridor mass divided by the corridor width.
for level in (95.0, 100.0, 105.0):
    print(f"local time at {level:g}: {float(local_time(calendar, level, 1.0)):.4f}")

# %%
# Cut the path into 10 blocks, permute and reverse some of them.  The
# calendar occupation does not change, bin for bin.
rng = np.random.default_rng(0)
perm = TimePermutation.random(10, rng)
times = np.arange(251) * 2.0**-8
levels = path.levels[:250]
original = occupation_from_path(times, np.append(levels, 0.0), Clock.calendar(), grid)
shuffled = occupation_from_path(times, np.append(shuffle_path(levels, perm), 0.0), Clock.calendar(), grid)
print("permutation:", [o + 1 for o in perm.order], "signs:", list(perm.signs))
print("bin masses identical:", np.array_equal(original.masses, shuffled.masses))
