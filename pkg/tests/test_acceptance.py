"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary (and to stdout when run as a script:
``python3 tests/test_acceptance.py``).
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np

from conftest import bs_call_oracle
from occflow import constants
from occflow.lov import LovConfig, TanhSensitivity, simulate_lov
from occflow.occupation import Clock, TimePermutation, make_grid, occupation_from_path, occupation_integral, shuffle_path
from occflow.pricing import (
    OptionSurface,
    TimerCall,
    VanillaCall,
    bl_occupation_strike,
    bs_price,
    corridor_var_strike_mc,
    mc_price,
    timer_price_mc,
)
from occflow.sde import ConstantVol, LocalVol, LocalVolTable, SimConfig, euler_occupied
from occflow.stopping import (
    analytic_euro_value,
    eps_expansion,
    eps_sweep,
    inspection_value,
    lsmc_value,
    two_date_value,
)

REPORT = []


def record(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def test_01_analytic_oracle():
    v = analytic_euro_value(1.0)
    ok = abs(v - math.sqrt(2 / math.pi)) <= 1e-12 and abs(v - 0.797885) < 5e-7
    record(1, "analytic European value", ok, f"{v:.12f} vs sqrt(2/pi) = {math.sqrt(2 / math.pi):.12f}")


def test_02_two_date_table():
    s = constants.TWO_DATE["settings"]
    t0 = time.perf_counter()
    r = two_date_value(s["T"], s["t"], s["N"], s["eps"], s["J"], seed=0)
    dt = time.perf_counter() - t0
    ref = constants.TWO_DATE["rows"]["{0.5,1}"][0]
    ok = ref - 0.03 <= r.value <= ref + 0.03 and dt < 30
    record(2, "two-date value", ok, f"{r.value:.4f} +/- {r.stderr:.4f} in [{ref - 0.03:.4f}, {ref + 0.03:.4f}], {dt:.1f}s (< 30s)")


def test_03_inspection_table():
    s = constants.INSPECTION["settings"]
    grid = np.linspace(*s["grid"][:2], s["grid"][2])
    t0 = time.perf_counter()
    res = {i: inspection_value(i, s["T"], s["N"], s["eps"], s["J"], grid, seed=0) for i in (0.5, 0.6, 0.7, 0.8, 0.9)}
    dt = time.perf_counter() - t0
    parts, ok = [], True
    for iota in (0.5, 0.7, 0.9):
        ref = constants.INSPECTION["rows"][iota][0]
        good = abs(res[iota].value - ref) <= 0.03
        ok &= good
        parts.append(f"iota={iota}: {res[iota].value:.4f} (ref {ref:.4f})")
    mid = res[0.7]
    hump = all(mid.value > res[i].value - 2 * math.hypot(mid.stderr, res[i].stderr) for i in (0.5, 0.6, 0.8, 0.9))
    ok = ok and hump and dt < 60
    record(3, "inspection values", ok, "; ".join(parts) + f"; hump {'ok' if hump else 'violated'}; {dt:.1f}s (< 60s)")


def test_04_lsmc_table():
    s = constants.LSMC["settings"]
    t0 = time.perf_counter()
    res = {m: lsmc_value(m, s["N"], s["J_off"], s["J_on"], s["T"], seed=0) for m in (0, 2, 5)}
    dt = time.perf_counter() - t0
    parts, ok = [], True
    for m, r in res.items():
        ref = constants.LSMC["rows"][m][0]
        ok &= abs(r.value - ref) <= 0.03
        parts.append(f"mbar={m}: {r.value:.4f} (ref {ref:.4f})")
    keys = sorted(res)
    mono = all(res[b].value >= res[a].value - 3 * math.hypot(res[a].stderr, res[b].stderr) for a, b in zip(keys, keys[1:]))
    ok = ok and mono and dt < 300
    record(4, "regression Monte Carlo", ok, "; ".join(parts) + f"; monotone {'ok' if mono else 'violated'}; {dt:.1f}s (< 300s)")


def test_05_eps_expansion():
    parts, ok = [], True
    results = eps_sweep("european", [0.05, 0.1, 0.2], T=1.0, N=1600, J=2**14, seed=0)
    for r in results:
        eps = r.params["eps"]
        ref = eps_expansion(1.0, eps)
        good = abs(r.value - ref) <= 3 * r.stderr + 0.005
        ok &= good
        parts.append(f"eps={eps}: {r.value:.4f} +/- {r.stderr:.4f} vs {ref:.4f}")
    record(5, "corridor expansion at the horizon", ok, "; ".join(parts))


def test_06_convergence_monotone():
    s = constants.EPS_CURVE["settings"]
    eps = constants.EPS_CURVE["eps"]
    res = eps_sweep("inspection", eps, s["T"], s["N"], s["J"], seed=0, iota=s["iota"])
    ok = all(b.value <= a.value + 3 * math.hypot(a.stderr, b.stderr) for a, b in zip(res, res[1:]))
    curve = ", ".join(f"{e}: {r.value:.4f}" for e, r in zip(eps, res))
    record(6, "inspection value nonincreasing in eps", ok, curve)


def test_07_occupation_properties():
    rng = np.random.default_rng(20240607)
    grid = make_grid(0.0, 2.0, 41)
    failures = 0
    for _ in range(1000):
        blocks, size = rng.integers(1, 9, size=2)
        N = int(blocks * size)
        dt = 2.0**-7
        times = np.arange(N + 1) * dt
        x = np.append(rng.uniform(-2.5, 2.5, N), 0.0)
        kappa = rng.uniform(0, 4)
        clock = Clock.exponential(kappa)
        occ = occupation_from_path(times, x, clock, grid)
        # mass conservation
        good = abs(occ.masses.sum() - occ.total_mass) <= 1e-12 * max(occ.total_mass, 1e-300)
        good &= occ.lo == x.min() and occ.hi == x.max()
        # time additivity
        s = int(rng.integers(0, N + 1))
        first = occupation_from_path(times[: s + 1], x[: s + 1], clock, grid)
        second = occupation_from_path(times[s:], x[s:], clock, grid)
        good &= np.allclose((first + second).masses, occ.masses, rtol=1e-13, atol=1e-16)
        # occupation time formula on bin step functions
        cal = occupation_from_path(times, x, Clock.calendar(), grid)
        vals = rng.normal(size=grid.size)
        direct = float(np.sum(vals[grid.locate(x[:-1])] * dt))
        good &= abs(occupation_integral(cal, lambda nodes: vals) - direct) <= 1e-12 * (1 + abs(direct))
        # chronology invariance
        perm = TimePermutation.random(int(blocks), rng)
        y = np.append(shuffle_path(x[:-1], perm), 0.0)
        good &= np.array_equal(occupation_from_path(times, y, Clock.calendar(), grid).masses, cal.masses)
        failures += not good
    record(7, "occupation-core properties", failures == 0, f"{failures} failures over 1000 instances")


def test_08_black_scholes_consistency():
    cfg = SimConfig(horizon=1.0, n_steps=50, n_paths=2**16, seed=0, x0=100.0, rate=0.02, dividend=0.01, antithetic=True)
    ens = euler_occupied(cfg, ConstantVol(0.25))
    parts, ok = [], True
    for K in (80.0, 100.0, 120.0):
        est = mc_price(VanillaCall(K), ens)
        exact = bs_call_oracle(100.0, K, 1.0, 0.02, 0.01, 0.25)
        ok &= abs(est.value - exact) <= 3 * est.stderr
        parts.append(f"K={K:g}: {est.value:.4f} +/- {est.stderr:.4f} vs {exact:.4f}")
    record(8, "constant-vol calls vs closed form", ok, "; ".join(parts))


def test_09_timer_invariance():
    budget, K, N, T = 0.04, 100.0, 400, 2.0
    dt = T / N
    cfg = SimConfig(horizon=T, n_steps=N, n_paths=2**15, seed=0, x0=100.0, antithetic=True, grid=make_grid(100, 80, 81))
    const = timer_price_mc(TimerCall(budget, K), euler_occupied(cfg, ConstantVol(0.2), record=("quadratic",)))
    exact = float(bs_price(100.0, K, budget, 0.0, 0.0, 1.0))
    # a skewed local vol floored at 0.15
    table = LocalVolTable(np.array([0.0]), np.array([60.0, 100.0, 140.0]), np.array([[0.45, 0.3, 0.15]]))
    local = timer_price_mc(TimerCall(budget, K), euler_occupied(replace(cfg, seed=1), LocalVol(table), record=("quadratic",)))
    sig_max = 0.45
    allowance = float(bs_price(100.0, K, budget + sig_max**2 * dt, 0, 0, 1.0) - bs_price(100.0, K, budget, 0, 0, 1.0))
    ok1 = abs(const.value - exact) <= 3 * const.stderr
    ok2 = abs(const.value - local.value) <= 3 * math.hypot(const.stderr, local.stderr) + allowance
    ok = ok1 and ok2 and const.n_unreached == 0 and local.n_unreached == 0
    record(
        9, "timer call insensitive to volatility", ok,
        f"constant {const.value:.4f} +/- {const.stderr:.4f} vs BS {exact:.4f}; "
        f"local vol {local.value:.4f} +/- {local.stderr:.4f} (allowance {allowance:.4f})",
    )


def skew(t, x):
    return np.clip(0.2 - 0.3 * np.log(np.asarray(x, dtype=float) / 100.0), 0.1, 0.5)


def test_10_lov_suite():
    grid = make_grid(100.0, 40.0, 41)
    cfg = SimConfig(horizon=0.5, n_steps=100, n_paths=2**12, seed=0, x0=100.0, grid=grid)
    zero = simulate_lov(replace(cfg, seed=1), LovConfig(skew))
    ref = euler_occupied(replace(cfg, seed=1, clock=Clock.exponential(12.0)), LocalVol(skew))
    collapse = np.array_equal(zero.ensemble.levels, ref.levels)
    res = simulate_lov(cfg, LovConfig(skew, TanhSensitivity(0.25 * 0.1**2, 5.0), kappa=12.0))
    positive = res.positivity.passed and res.n_floored == 0
    worst = 0.0
    x = res.ensemble.levels
    for n in (25, 50, 75, 99):
        spots, c = x[:, n], res.corrections[:, n]
        for idx in np.array_split(np.argsort(spots), 10):
            se = c[idx].std(ddof=1) / math.sqrt(idx.size)
            if se > 0:
                worst = max(worst, abs(c[idx].mean()) / se)
    centered = worst <= 4.0
    ok = collapse and positive and centered
    record(
        10, "LOV model", ok,
        f"zero-sensitivity collapse {'exact' if collapse else 'differs'}; positivity "
        f"{'pass' if res.positivity.passed else 'fail'} (ratio {res.positivity.worst_ratio:.3f}), {res.n_floored} floored; "
        f"worst binned correction mean {worst:.2f} stderr (limit 4)",
    )


def test_11_static_replication():
    surface = OptionSurface.black_scholes(100.0, 0.2, np.linspace(1.0, 1000.0, 20000), np.array([1.0]))
    wide = bl_occupation_strike(surface, 1.0, 1000.0, 1.0)
    ok1 = abs(wide / 0.04 - 1) <= 1e-3
    cfg = SimConfig(horizon=1.0, n_steps=200, n_paths=2**14, seed=0, x0=100.0, antithetic=True, grid=make_grid(100, 50, 101))
    est = corridor_var_strike_mc(90.0, 110.0, euler_occupied(cfg, ConstantVol(0.2), record=("quadratic",)))
    static = bl_occupation_strike(surface, 90.0, 110.0, 1.0)
    ok2 = abs(est.value - static) <= 3 * est.stderr
    record(
        11, "static replication", ok1 and ok2,
        f"wide corridor {wide:.6f} vs 0.04 (rel {abs(wide / 0.04 - 1):.1e}); "
        f"[90, 110]: static {static:.5f} vs MC {est.value:.5f} +/- {est.stderr:.5f}",
    )


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
