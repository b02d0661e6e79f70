import math

import numpy as np
import pytest

from conftest import bs_call_oracle, within
from occflow.errors import ConfigurationError, DimensionError, EmptyOccupationError, SimulationError
from occflow.occupation import Clock, DiscreteOccupation, make_grid, occupation_from_path
from occflow.pricing import VanillaCall, mc_price
from occflow.rng import normal_increments
from occflow.sde import (
    ConstantVol,
    GuyonToyVol,
    LocalVol,
    LocalVolTable,
    SimConfig,
    ema,
    euler_occupied,
    guyon_toy_vol,
    read_local_vol_csv,
    simulate_bm,
    write_local_vol_csv,
)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(horizon=0)
    with pytest.raises(ConfigurationError):
        SimConfig(n_paths=3, antithetic=True)
    with pytest.raises(ConfigurationError):
        SimConfig(n_steps=0)
    cfg = SimConfig(x0=100)
    assert cfg.grid.size == 41 and cfg.grid.nodes[0] == pytest.approx(50)


@pytest.mark.parametrize("K", [90.0, 100.0, 110.0])
def test_constant_vol_prices_calls(K):
    cfg = SimConfig(horizon=1.0, n_steps=50, n_paths=2**16, seed=1, x0=100.0, rate=0.03, dividend=0.01)
    ens = euler_occupied(cfg, ConstantVol(0.2))
    est = mc_price(VanillaCall(K), ens)
    assert within(est, bs_call_oracle(100, K, 1.0, 0.03, 0.01, 0.2))


def test_zero_vol_is_deterministic():
    cfg = SimConfig(horizon=2.0, n_steps=10, n_paths=4, x0=50.0, rate=0.05)
    ens = euler_occupied(cfg, ConstantVol(0.0))
    assert np.allclose(ens.levels, 50.0 * np.exp(0.05 * cfg.times))


def _plain_loop(cfg, sigma_fn):
    z = normal_increments(cfg.seed, cfg.n_paths, cfg.n_steps)
    out = np.empty((cfg.n_paths, cfg.n_steps + 1))
    for j in range(cfg.n_paths):
        x = cfg.x0
        out[j, 0] = x
        for n in range(cfg.n_steps):
            s = float(sigma_fn(cfg.times[n], x))
            x = x * math.exp(s * math.sqrt(cfg.dt) * z[j, n] + (cfg.rate - 0.5 * s * s) * cfg.dt)
            out[j, n + 1] = x
    return out


def test_local_vol_matches_plain_loop():
    table = LocalVolTable(np.array([0.0, 1.0]), np.array([80.0, 100.0, 120.0]), np.array([[0.3, 0.2, 0.15], [0.25, 0.2, 0.18]]))
    cfg = SimConfig(horizon=1.0, n_steps=20, n_paths=16, seed=5, x0=100.0, rate=0.01)
    ens = euler_occupied(cfg, LocalVol(table))
    assert np.allclose(ens.levels, _plain_loop(cfg, table), rtol=1e-13)


def test_local_vol_table_interpolation_and_io(tmp_path):
    table = LocalVolTable(np.array([0.0, 1.0]), np.array([80.0, 120.0]), np.array([[0.3, 0.1], [0.5, 0.3]]))
    assert table(0.5, 100.0) == pytest.approx(0.3)
    assert table(5.0, 0.0) == pytest.approx(0.5)
    assert table.floor == 0.1
    p = tmp_path / "lv.csv"
    write_local_vol_csv(table, p)
    back = read_local_vol_csv(p)
    assert np.array_equal(back.vols, table.vols)
    with pytest.raises(DimensionError):
        LocalVolTable(np.array([0.0]), np.array([1.0, 2.0]), np.array([0.2]))


def test_local_vol_csv_rejects_ragged(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x,vol\n0,1,0.2\n0,2,0.2\n1,1,0.2\n")
    with pytest.raises(ConfigurationError):
        read_local_vol_csv(p)


# guyon toy model


def test_guyon_at_average_level():
    g = make_grid(100, 50, 11)
    occ = DiscreteOccupation.empty(g).accumulate(100.0, 0.1)
    assert guyon_toy_vol(occ, 100.0) == pytest.approx(0.15, abs=1e-12)
    assert guyon_toy_vol(DiscreteOccupation.empty(g), 100.0, x0=100.0) == pytest.approx(0.15)


def test_guyon_decreasing_in_ratio():
    g = make_grid(100, 50, 11)
    occ = DiscreteOccupation.empty(g, 50).accumulate(np.full(50, 100.0), 0.1)
    x = np.linspace(60, 140, 50)
    v = guyon_toy_vol(occ, x)
    assert np.all(np.diff(v) <= 0)
    assert v[-1] == 0.0
    assert np.all(guyon_toy_vol(occ, x, cap=0.3) <= 0.3)


def test_guyon_requires_initial_level_when_empty():
    with pytest.raises(EmptyOccupationError):
        guyon_toy_vol(DiscreteOccupation.empty(make_grid(1, 1, 3)), 1.0)


def test_ema_examples():
    g = make_grid(100, 50, 11)
    occ = DiscreteOccupation.empty(g)
    occ.accumulate(90.0, 1.0)
    occ.accumulate(120.0, 2.0)
    assert ema(occ) == pytest.approx(110.0)
    with pytest.raises(EmptyOccupationError):
        ema(DiscreteOccupation.empty(g))


def test_ema_exponential_weights_recent():
    times = np.linspace(0, 1, 101)
    x = np.where(times < 0.5, 90.0, 110.0)
    g = make_grid(100, 50, 11)
    flat = occupation_from_path(times, x, Clock.calendar(), g)
    recent = occupation_from_path(times, x, Clock.exponential(12), g)
    assert ema(flat) == pytest.approx(100.0, abs=0.5)
    assert ema(recent) > 109.0


def test_guyon_martingale():
    cfg = SimConfig(horizon=1.0, n_steps=100, n_paths=2**12, seed=3, x0=100.0, clock=Clock.exponential(12), antithetic=True)
    ens = euler_occupied(cfg, GuyonToyVol(x0=100.0, cap=2.0))
    xT = ens.levels[:, -1]
    pairs = 0.5 * (xT[: 2**11] + xT[2**11 :])
    assert abs(pairs.mean() - 100.0) <= 3 * pairs.std(ddof=1) / math.sqrt(pairs.size)


def test_invalid_vol_raises_with_context():
    bad = lambda occ, x, t: np.where(x > 0, -1.0, 0.2)  # noqa: E731
    with pytest.raises(SimulationError) as info:
        euler_occupied(SimConfig(n_paths=4, n_steps=5), bad)
    assert info.value.step == 0 and info.value.path == 0


# occupations recorded by the engine


def test_clocks_recorded_by_engine():
    cfg = SimConfig(horizon=1.0, n_steps=40, n_paths=8, seed=2, x0=100.0, grid=make_grid(100, 50, 21))
    ens = euler_occupied(cfg, ConstantVol(0.25), record=("quadratic", Clock.exponential(2.0)))
    assert np.allclose(ens.occupation.total_mass, 1.0)
    assert np.allclose(ens.occupations["quadratic"].total_mass, 0.0625)
    assert np.allclose(ens.occupations["exponential(2)"].total_mass, sum(math.exp(2 * t) * cfg.dt for t in cfg.times[:-1]))
    for j in range(cfg.n_paths):
        direct = occupation_from_path(cfg.times, ens.levels[j], Clock.calendar(), cfg.grid)
        assert np.allclose(direct.masses, ens.occupation.masses[j])
        assert ens.occupation.hi[j] == ens.levels[j].max()


def test_snapshots_and_hook():
    cfg = SimConfig(n_steps=10, n_paths=6, seed=4, x0=100.0)
    seen = []
    ens = euler_occupied(cfg, ConstantVol(0.2), snapshot_steps=(0, 5, 10), hook=lambda n, t, occ, x, s: seen.append(n))
    assert seen == list(range(10))
    assert np.all(ens.snapshots[0].total_mass == 0)
    assert np.allclose(ens.snapshots[5].total_mass, 0.5)
    p = ens.path(2)
    assert np.allclose(p.snapshots[10].masses, ens.occupation.masses[2])
    with pytest.raises(ConfigurationError):
        euler_occupied(cfg, ConstantVol(0.2), snapshot_steps=(11,))


def test_simulate_bm_increments():
    cfg = SimConfig(horizon=1.0, n_steps=16, n_paths=8, seed=9, x0=0.0)
    ens = simulate_bm(cfg)
    z = normal_increments(9, 8, 16)
    assert np.allclose(np.diff(ens.levels, axis=1), z * math.sqrt(1 / 16))
    assert np.allclose(ens.occupation.total_mass, 1.0)


def test_equal_seeds_reproduce():
    cfg = SimConfig(n_steps=20, n_paths=10, seed=7, x0=100.0, clock=Clock.exponential(12))
    a = euler_occupied(cfg, GuyonToyVol())
    b = euler_occupied(cfg, GuyonToyVol())
    assert np.array_equal(a.levels, b.levels)


def test_guyon_runs_with_spikes():
    g = make_grid(100, 50, 101)
    cfg = SimConfig(horizon=1.0, n_steps=1000, n_paths=100, seed=0, x0=100.0, clock=Clock.exponential(12), grid=g)
    ens = euler_occupied(cfg, GuyonToyVol(x0=100.0))
    assert np.all(np.isfinite(ens.levels))
    assert np.median(ens.vols) < 0.3 and ens.vols.max() > 1.0


def test_guyon_cap_prevents_abort():
    g = make_grid(100, 50, 101)
    cfg = SimConfig(horizon=1.0, n_steps=1000, n_paths=2048, seed=0, x0=100.0, clock=Clock.exponential(12), grid=g)
    with pytest.raises(SimulationError):
        euler_occupied(cfg, GuyonToyVol(x0=100.0))
    ens = euler_occupied(cfg, GuyonToyVol(x0=100.0, cap=5.0))
    assert ens.vols.max() <= 5.0
