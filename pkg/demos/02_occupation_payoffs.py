"""
Pricing occupation payoffs
==========================

Asian, lookback, range accrual, Parisian, corridor variance and timer
payoffs are all functions of the terminal occupation and the terminal
level, so one simulation prices them all.
"""

import numpy as np

from occflow.occupation import Clock, make_grid
from occflow.pricing import (
    AsianFloatingCall,
    CorridorVarFloatingLeg,
    LookbackFloatingCall,
    OptionSurface,
    ParisianUpOutAssetOrNothing,
    RangeAccrual,
    TimerCall,
    bl_occupation_strike,
    bs_price,
    corridor_var_strike_mc,
    mc_price,
)
from occflow.sde import ConstantVol, GuyonToyVol, SimConfig, euler_occupied

payoffs = [
    AsianFloatingCall(),
    LookbackFloatingCall(),
    RangeAccrual(95.0, 105.0, coupon=1.0),
    ParisianUpOutAssetOrNothing(110.0, window=0.1),
    CorridorVarFloatingLeg(90.0, 110.0),
    TimerCall(budget=0.04, strike=100.0),
]

# %%
# Constant volatility versus the path-dependent toy model, whose volatility
# reads the exponentially weighted average of the path.
grid = make_grid(100.0, 60.0, 121)
gbm_cfg = SimConfig(horizon=1.0, n_steps=200, n_paths=2**13, seed=1, x0=100.0, grid=grid, antithetic=True)
toy_cfg = SimConfig(horizon=1.0, n_steps=200, n_paths=2**13, seed=1, x0=100.0, grid=grid, antithetic=True,
                    clock=Clock.exponential(12.0))
record = ("calendar", "quadratic")
models = {
    "gbm 0.2": euler_occupied(gbm_cfg, ConstantVol(0.2), record=record),
    "toy vol": euler_occupied(toy_cfg, GuyonToyVol(x0=100.0, cap=1.0), record=record),
}

for name, ens in models.items():
    print(f"--- {name}")
    for spec in payoffs:
        print(f"{type(spec).__name__:>28}: {mc_price(spec, ens)}")

# %%
# A timer call does not care about the volatility level: with a variance
# budget of 0.04 it is worth the Black-Scholes call with total variance 0.04.
print("timer reference:", float(bs_price(100.0, 100.0, 0.04, 0.0, 0.0, 1.0)))

# %%
# The fair corridor variance is statically replicated by out-of-the-money
# vanillas weighted by 2/K^2.
surface = OptionSurface.black_scholes(100.0, 0.2, np.linspace(1.0, 1000.0, 20000), np.array([1.0]))
static = bl_occupation_strike(surface, 90.0, 110.0, 1.0)
mc = corridor_var_strike_mc(90.0, 110.0, models["gbm 0.2"])
print(f"corridor [90, 110]: static {static:.5f}, Monte Carlo {mc}")
