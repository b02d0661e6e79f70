import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import bs_call_oracle, within
from occflow.errors import ConfigurationError, DimensionError
from occflow.lov import (
    EmaSensitivity,
    LovConfig,
    OneFactorSensitivity,
    TanhSensitivity,
    ZeroSensitivity,
    bandwidth,
    check_positivity,
    gamma_scale,
    lov_variance,
    particle_projection,
    quartic_kernel,
    simulate_lov,
)
from occflow.occupation import DiscreteOccupation, make_grid
from occflow.pricing import VanillaCall, mc_price
from occflow.sde import LocalVol, SimConfig, euler_occupied


def skew(t, x):
    return np.clip(0.2 - 0.3 * np.log(np.asarray(x, dtype=float) / 100.0), 0.1, 0.5)


def test_gamma_scale():
    assert gamma_scale(2.0, 0.0) == pytest.approx(0.5)
    assert gamma_scale(0.5, 12.0) == pytest.approx(12 / math.expm1(6))
    assert np.isinf(gamma_scale(0.0, 12.0))


def test_gamma_times_mass_is_one():
    N, T, kappa = 2000, 0.5, 12.0
    times = np.linspace(0, T, N + 1)
    mass = sum(math.exp(kappa * t) * T / N for t in times[:-1])
    assert gamma_scale(T, kappa) * mass == pytest.approx(1.0, rel=kappa * T / N)


def _occ(grid, values, total=None):
    occ = DiscreteOccupation.empty(grid)
    occ.masses[:] = values
    occ.total_mass = np.asarray(np.sum(values) if total is None else total, dtype=float)
    return occ


def test_zero_sensitivity_returns_local_variance():
    g = make_grid(100, 40, 9)
    occ = _occ(g, np.arange(9.0))
    hat = _occ(g, np.ones(9), occ.total_mass)
    cfg = LovConfig(skew)
    assert lov_variance(occ, hat, 90.0, 0.3, cfg) == pytest.approx(skew(0.3, 90.0) ** 2)


def test_centered_projection_returns_local_variance():
    g = make_grid(100, 40, 9)
    occ = _occ(g, np.arange(9.0))
    cfg = LovConfig(skew, TanhSensitivity(0.01))
    assert lov_variance(occ, occ.copy(), 105.0, 0.3, cfg) == pytest.approx(skew(0.3, 105.0) ** 2)


def test_empty_occupation_has_no_correction():
    g = make_grid(100, 40, 9)
    cfg = LovConfig(skew, OneFactorSensitivity(0.4, 90, 110))
    empty = DiscreteOccupation.empty(g)
    assert lov_variance(empty, empty, 100.0, 0.0, cfg) == pytest.approx(0.04)


def test_one_factor_multiplicative_factor():
    g = make_grid(100, 40, 9)
    a = OneFactorSensitivity(0.4, 95.0, 105.0)
    inside = (g.nodes >= 95) & (g.nodes < 105)
    occ = _occ(g, np.where(inside, 0.5 / inside.sum(), 0.5 / (~inside).sum()))
    hat = _occ(g, np.where(inside, 0.25 / inside.sum(), 0.75 / (~inside).sum()))
    cfg = LovConfig(lambda t, x: 0.2, a, multiplicative=True)
    assert lov_variance(occ, hat, 100.0, 1.0, cfg) / 0.04 == pytest.approx(1.1)


def test_additive_correction_by_hand():
    g = make_grid(0.0, 1.0, 3)
    occ = _occ(g, [0.0, 1.0, 1.0])
    hat = _occ(g, [1.0, 1.0, 0.0])
    cfg = LovConfig(lambda t, x: 1.0, OneFactorSensitivity(0.3, 0.5, 2.0))
    # (0.3 * (1 - 0)) / 2
    assert lov_variance(occ, hat, 0.0, 1.0, cfg) == pytest.approx(1.0 + 0.15)


def test_flooring_is_reported():
    g = make_grid(0.0, 1.0, 3)
    occ = _occ(g, [1.0, 0.0, 0.0])
    hat = _occ(g, [0.0, 0.0, 1.0])
    cfg = LovConfig(lambda t, x: 0.1, OneFactorSensitivity(-1.0, -2.0, -0.5))
    var, floored, corr = lov_variance(occ, hat, 0.0, 1.0, cfg, return_details=True)
    assert floored and var == cfg.var_floor and corr == pytest.approx(-1.0)


def test_grid_mismatch():
    cfg = LovConfig(skew)
    with pytest.raises(DimensionError):
        lov_variance(DiscreteOccupation.empty(make_grid(0, 1, 3)), DiscreteOccupation.empty(make_grid(0, 1, 5)), 100.0, 1.0, cfg)


def test_positivity_guard():
    g = make_grid(100, 40, 41)
    assert check_positivity(LovConfig(skew), g, [0.0, 0.5]).passed
    assert check_positivity(LovConfig(skew, TanhSensitivity(0.25 * 0.1**2)), g, [0.0]).passed
    bad = check_positivity(LovConfig(skew, OneFactorSensitivity(0.6), multiplicative=True), g, [0.0])
    assert not bad.passed and bad.worst_ratio == pytest.approx(1.2)
    assert check_positivity(LovConfig(skew, OneFactorSensitivity(0.4), multiplicative=True), g, [0.0]).passed


def test_sensitivity_shapes():
    nodes = np.linspace(50, 150, 7)
    spots = np.array([90.0, 110.0])
    for s in (ZeroSensitivity(), OneFactorSensitivity(1.0, 90, 110), EmaSensitivity(0.1), TanhSensitivity(0.01)):
        assert s(0.0, spots[:, None], nodes).shape == (2, 7)
    tanh = TanhSensitivity(0.01)
    assert abs(tanh(0.0, 100.0, nodes)).max() <= 0.01
    assert tanh(0.0, 100.0, 100.0) == 0


# projection


def test_quartic_kernel_integrates_to_one():
    from scipy.integrate import quad

    assert quad(lambda d: float(quartic_kernel(d, 0.7)), -1, 1)[0] == pytest.approx(1.0)
    assert quartic_kernel(0.7, 0.7) == 0


def test_projection_single_particle():
    m = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(particle_projection(np.array([5.0]), m, 0.1), m)


def test_projection_equal_spots_gives_mean():
    rng = np.random.default_rng(0)
    m = rng.uniform(size=(20, 4))
    out = particle_projection(np.full(20, 3.0), m, 0.5)
    assert np.allclose(out, m.mean(axis=0))
    assert np.allclose(particle_projection(rng.uniform(size=20), m, np.inf), m.mean(axis=0))


def test_projection_matches_dense_formula():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(700)
    m = rng.uniform(size=(700, 5))
    h = 0.3
    w = quartic_kernel(x[:, None] - x[None, :], h)
    dense = (w @ m) / w.sum(axis=1, keepdims=True)
    assert np.allclose(particle_projection(x, m, h, chunk=64), dense, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    x=arrays(np.float64, st.integers(2, 40), elements=st.floats(-5, 5)),
    h=st.floats(0.05, 5),
    seed=st.integers(0, 1000),
)
def test_projection_normal_equations(x, h, seed):
    m = np.random.default_rng(seed).uniform(size=(x.size, 3))
    hat = particle_projection(x, m, h)
    w = quartic_kernel(x[:, None] - x[None, :], h)
    resid = (w * (m[None, :, :] - hat[:, None, :]).transpose(2, 0, 1)).sum(axis=(1, 2))
    assert np.all(np.abs(resid) <= 1e-10 * (np.abs(w).sum() * np.abs(m).max() + 1))


def test_projection_errors():
    with pytest.raises(ConfigurationError):
        particle_projection(np.zeros(3), np.zeros((3, 2)), 0.0)
    with pytest.raises(DimensionError):
        particle_projection(np.zeros(3), np.zeros((2, 2)), 1.0)


def test_bandwidth_rule():
    x = np.random.default_rng(2).standard_normal(1024)
    assert bandwidth(x) == pytest.approx(1.5 * x.std() * 1024**-0.2)
    assert np.isinf(bandwidth(np.ones(10)))


# simulation


def test_zero_sensitivity_collapses_to_local_vol():
    g = make_grid(100, 40, 41)
    cfg = SimConfig(horizon=0.5, n_steps=50, n_paths=256, seed=3, x0=100.0, grid=g)
    lov = simulate_lov(cfg, LovConfig(skew))
    ref = euler_occupied(cfg, LocalVol(skew))
    assert np.array_equal(lov.ensemble.levels, ref.levels)
    assert lov.n_floored == 0


def test_constant_local_vol_prices_calls():
    cfg = SimConfig(horizon=0.5, n_steps=25, n_paths=2**13, seed=4, x0=100.0, grid=make_grid(100, 40, 41))
    res = simulate_lov(cfg, LovConfig(lambda t, x: np.full(np.shape(x), 0.2)))
    for K in (95.0, 105.0):
        assert within(mc_price(VanillaCall(K), res.ensemble), bs_call_oracle(100, K, 0.5, 0, 0, 0.2))


def test_simulate_lov_needs_ensemble():
    with pytest.raises(ConfigurationError):
        simulate_lov(SimConfig(n_paths=1), LovConfig(skew))


def test_tanh_run_is_positive_and_centered():
    g = make_grid(100, 40, 41)
    cfg = SimConfig(horizon=0.5, n_steps=50, n_paths=2**11, seed=5, x0=100.0, grid=g)
    res = simulate_lov(cfg, LovConfig(skew, TanhSensitivity(0.25 * 0.1**2)))
    assert res.positivity.passed and res.n_floored == 0
    assert np.any(res.corrections != 0)
    # correction is centered conditionally on the spot: deciles at the last step
    x = res.ensemble.levels[:, -2]
    c = res.corrections[:, -1]
    for idx in np.array_split(np.argsort(x), 10):
        assert abs(c[idx].mean()) <= 4 * c[idx].std(ddof=1) / math.sqrt(idx.size) + 1e-12
