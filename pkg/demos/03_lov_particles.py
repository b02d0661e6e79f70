"""
The local occupied volatility model
===================================

Local volatility plus a correction driven by how the path's occupation
differs from the average occupation of paths ending at the same spot.  The
spot-conditional average is estimated by a kernel regression across the
ensemble, so every step is synchronized across particles.
"""

import numpy as np

from occflow.lov import LovConfig, TanhSensitivity, check_positivity, simulate_lov
from occflow.occupation import make_grid
from occflow.pricing import VanillaCall, mc_price
from occflow.sde import LocalVol, SimConfig, euler_occupied


def sigma_loc(t, x):
    return np.clip(0.2 - 0.3 * np.log(np.asarray(x, dtype=float) / 100.0), 0.1, 0.5)


grid = make_grid(100.0, 40.0, 41)
cfg = SimConfig(horizon=0.5, n_steps=100, n_paths=2**12, seed=0, x0=100.0, grid=grid)

# %%
# The sensitivity is bounded by a quarter of the squared volatility floor,
# which keeps the variance positive everywhere.
lov = LovConfig(sigma_loc, TanhSensitivity(0.25 * 0.1**2, alpha=5.0), kappa=12.0)
print(check_positivity(lov, grid, cfg.times))

res = simulate_lov(cfg, lov)
print("floored variances:", res.n_floored)
h = res.bandwidths[np.isfinite(res.bandwidths)]
print(f"kernel bandwidth from {h.min():.3f} to {h.max():.3f}")

# %%
# Conditionally on the spot the correction averages out, so vanillas keep
# their local-volatility prices.
spots = res.ensemble.levels[:, -2]
corr = res.corrections[:, -1]
for idx in np.array_split(np.argsort(spots), 5):
    m = corr[idx].mean()
    se = corr[idx].std(ddof=1) / np.sqrt(idx.size)
    print(f"spots {spots[idx].min():7.2f}..{spots[idx].max():7.2f}: mean correction {m:+.2e} +/- {se:.1e}")

ref = euler_occupied(cfg, LocalVol(sigma_loc))
for K in (90.0, 100.0, 110.0):
    print(f"K={K:g}: LOV {mc_price(VanillaCall(K), res.ensemble)}, local vol {mc_price(VanillaCall(K), ref)}")
