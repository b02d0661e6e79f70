"""Local occupied volatility (LOV).

The variance is local volatility plus a linear occupation correction,

    sigma^2(t, x) = sigma_loc^2(t, x) + gamma_t * sum_m l(t, x, x_m) (O_m - Ohat_m),

where ``O`` is the exponential-clock occupation of the path and ``Ohat`` its
spot-conditional expectation, estimated across the ensemble with a
Nadaraya-Watson kernel smoother.  Because ``Ohat`` is the conditional mean of
``O`` given the spot, the correction averages to zero at every spot and the
vanilla smile of ``sigma_loc`` is preserved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DimensionError
from .occupation import Clock, CorridorGrid, DiscreteOccupation
from .sde import OccupiedEnsemble, SimConfig, euler_occupied

__all__ = [
    "ZeroSensitivity",
    "OneFactorSensitivity",
    "EmaSensitivity",
    "TanhSensitivity",
    "LovConfig",
    "PositivityReport",
    "LovResult",
    "gamma_scale",
    "lov_variance",
    "check_positivity",
    "quartic_kernel",
    "particle_projection",
    "bandwidth",
    "LovVolatility",
    "simulate_lov",
]

log = logging.getLogger(__name__)


# sensitivity functions l(t, spot, level); spot broadcasts against level


@dataclass(frozen=True)
class ZeroSensitivity:
    kind = "zero"

    def __call__(self, t, spot, level):
        return np.zeros(np.broadcast_shapes(np.shape(spot), np.shape(level)))


@dataclass(frozen=True)
class OneFactorSensitivity:
    """``beta * 1_A(level)`` with ``A = [lower, upper)``."""

    beta: float
    lower: float = -np.inf
    upper: float = np.inf
    kind = "one_factor"

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ConfigurationError("one-factor corridor bounds must be ordered")

    def __call__(self, t, spot, level):
        level = np.asarray(level, dtype=float)
        ind = (level >= self.lower) & (level < self.upper)
        return np.broadcast_to(self.beta * ind, np.broadcast_shapes(np.shape(spot), level.shape)).astype(float)


@dataclass(frozen=True)
class EmaSensitivity:
    """``beta * log(level)``: the correction then reads the log of the moving average."""

    beta: float
    kind = "ema"

    def __call__(self, t, spot, level):
        level = np.asarray(level, dtype=float)
        if np.any(level <= 0):
            raise ConfigurationError("the log sensitivity needs positive grid levels")
        return np.broadcast_to(self.beta * np.log(level), np.broadcast_shapes(np.shape(spot), level.shape)).astype(float)


@dataclass(frozen=True)
class TanhSensitivity:
    """``scale * tanh(alpha * (level / spot - 1))``.

    Bounded by ``scale``; choosing ``scale = floor**2 / 4`` with ``floor`` the
    smallest local volatility keeps the additive variance positive.  Levels
    above the spot push the variance up, levels below push it down.
    """

    scale: float
    alpha: float = 5.0
    kind = "tanh"

    def __call__(self, t, spot, level):
        spot = np.asarray(spot, dtype=float)
        return self.scale * np.tanh(self.alpha * (np.asarray(level, dtype=float) / spot - 1.0))


@dataclass(frozen=True, eq=False)
class LovConfig:
    """LOV model parameters.

    Attributes
    ----------
    sigma_loc : callable
        Local volatility ``(t, x) -> vol``.
    sensitivity : callable
        ``l(t, spot, level)`` in variance units (additive) or as a relative
        factor (multiplicative).
    kappa : float
        Rate of the exponential clock.
    multiplicative : bool
        Use ``sigma_loc^2 * (1 + correction)`` instead of ``sigma_loc^2 + correction``.
    bandwidth_scale, bandwidth_exponent : float
        Kernel bandwidth ``scale * sd(X_t) * J**exponent``.
    var_floor : float
        Variances below this are floored (and counted).
    """

    sigma_loc: object
    sensitivity: object = field(default_factory=ZeroSensitivity)
    kappa: float = 12.0
    multiplicative: bool = False
    bandwidth_scale: float = 1.5
    bandwidth_exponent: float = -0.2
    var_floor: float = 1e-8
    kernel: str = "quartic"

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ConfigurationError("kappa must be nonnegative")
        if not self.bandwidth_scale > 0:
            raise ConfigurationError("bandwidth scale must be positive")
        if self.kernel != "quartic":
            raise ConfigurationError(f"unsupported kernel {self.kernel!r}")
        if not self.var_floor > 0:
            raise ConfigurationError("variance floor must be positive")


def gamma_scale(t, kappa):
    """Normalizer ``kappa / (exp(kappa t) - 1)`` (``1/t`` for ``kappa = 0``); infinite at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        if kappa == 0:
            return 1.0 / t
        return kappa / np.expm1(kappa * t)


def _correction(occ, occ_hat, x, t, sens):
    """``sum_m l(t, x, x_m) (O_m - Ohat_m) / mass``, zero where the occupation is empty."""
    if not occ.grid.same_as(occ_hat.grid):
        raise DimensionError("occupation and projection live on different grids")
    x = np.asarray(x, dtype=float)
    nodes = occ.grid.nodes
    ell = sens(t, x[..., None], nodes)
    spread = occ.masses - occ_hat.masses
    mass = np.asarray(occ.total_mass)
    raw = np.sum(ell * spread, axis=-1)
    # exact normalization by the discrete clock mass (the projection has the same mass)
    return np.where(mass > 0, raw / np.where(mass > 0, mass, 1.0), 0.0)


def lov_variance(occ, occ_hat, x, t, cfg: LovConfig, return_details=False):
    """LOV variance at spot(s) ``x``.

    The correction is normalized by the total mass of the discrete occupation,
    which is the exact reciprocal of the clock's elapsed mass on the time grid.

    Returns
    -------
    variance : ndarray
        Floored at ``cfg.var_floor``.
    floored : ndarray of bool
        Returned with ``return_details``, together with the raw correction.
    """
    loc2 = np.square(np.asarray(cfg.sigma_loc(t, x), dtype=float))
    corr = _correction(occ, occ_hat, x, t, cfg.sensitivity)
    var = loc2 * (1.0 + corr) if cfg.multiplicative else loc2 + corr
    floored = var < cfg.var_floor
    if np.any(floored):
        var = np.where(floored, cfg.var_floor, var)
    if return_details:
        return var, floored, corr
    return var


@dataclass(frozen=True)
class PositivityReport:
    passed: bool
    worst_ratio: float
    worst_time: float
    worst_spot: float

    def __bool__(self):
        return self.passed


def check_positivity(cfg: LovConfig, grid: CorridorGrid, times) -> PositivityReport:
    """Check ``sup_x |l(t, x', x)| < sigma_loc^2(t, x') / 2`` over the grid (additive form).

    In the multiplicative form the bound is ``1/2``.  The worst ratio of the
    left side to the bound is reported; the check passes when it is below 1.
    """
    nodes = grid.nodes
    worst = (-np.inf, np.nan, np.nan)
    for t in np.atleast_1d(np.asarray(times, dtype=float)):
        sup = np.max(np.abs(cfg.sensitivity(t, nodes[:, None], nodes[None, :])), axis=1)
        if cfg.multiplicative:
            bound = np.full(nodes.shape, 0.5)
        else:
            bound = 0.5 * np.square(np.asarray(cfg.sigma_loc(t, nodes), dtype=float))
        ratio = sup / bound
        k = int(np.argmax(ratio))
        if ratio[k] > worst[0]:
            worst = (float(ratio[k]), float(t), float(nodes[k]))
    return PositivityReport(worst[0] < 1.0, *worst)


def quartic_kernel(delta, h):
    """``(15/16) (1 - (delta/h)^2)^2 / h`` on ``|delta| <= h``, zero outside."""
    u = np.asarray(delta, dtype=float) / h
    return np.where(np.abs(u) <= 1, 15.0 / 16.0 * np.square(1.0 - u * u) / h, 0.0)


def particle_projection(spots, masses, h, chunk=512):
    """Nadaraya-Watson estimate of the occupation given the spot, per particle.

    Parameters
    ----------
    spots : array, shape (J,)
    masses : array, shape (J, M)
        Binned occupation of every particle.
    h : float
        Quartic-kernel bandwidth; ``inf`` gives the plain ensemble mean.

    Returns
    -------
    ndarray, shape (J, M)
    """
    spots = np.asarray(spots, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if spots.ndim != 1 or masses.ndim != 2 or masses.shape[0] != spots.size:
        raise DimensionError("expected spots (J,) and masses (J, M)")
    if not h > 0:
        raise ConfigurationError(f"bandwidth must be positive, got {h}")
    if np.isinf(h):
        return np.broadcast_to(masses.mean(axis=0), masses.shape).copy()
    order = np.argsort(spots, kind="stable")
    xs = spots[order]
    ms = masses[order]
    out = np.empty_like(ms)
    for lo in range(0, xs.size, chunk):
        tgt = xs[lo : lo + chunk]
        a = np.searchsorted(xs, tgt[0] - h, side="left")
        b = np.searchsorted(xs, tgt[-1] + h, side="right")
        w = quartic_kernel(tgt[:, None] - xs[None, a:b], h)
        out[lo : lo + chunk] = (w @ ms[a:b]) / w.sum(axis=1, keepdims=True)
    res = np.empty_like(out)
    res[order] = out
    return res


def bandwidth(spots, scale=1.5, exponent=-0.2):
    """Silverman-type bandwidth ``scale * sd * J**exponent``; ``inf`` for a degenerate ensemble."""
    spots = np.asarray(spots, dtype=float)
    sd = spots.std()
    if sd == 0:
        return np.inf
    return scale * sd * spots.size**exponent


class LovVolatility:
    """Ensemble volatility functional for the occupied engine.

    Keeps a flooring counter and, per step, the correction term applied to
    every particle.
    """

    def __init__(self, cfg: LovConfig, n_paths, n_steps):
        self.cfg = cfg
        self.n_floored = 0
        self.corrections = np.zeros((n_paths, n_steps))
        self.bandwidths = []
        self._step = 0

    def __call__(self, occ, x, t):
        cfg = self.cfg
        if x.size < 2:
            raise ConfigurationError("the particle method needs at least two particles")
        h = bandwidth(x, cfg.bandwidth_scale, cfg.bandwidth_exponent)
        self.bandwidths.append(h)
        hat = DiscreteOccupation(occ.grid, particle_projection(x, occ.masses, h), occ.total_mass, occ.first_moment, occ.lo, occ.hi)
        var, floored, corr = lov_variance(occ, hat, x, t, cfg, return_details=True)
        n = int(floored.sum())
        if n:
            self.n_floored += n
            log.warning("floored %d LOV variances at t=%g", n, t)
        self.corrections[:, self._step] = corr
        self._step += 1
        return np.sqrt(var)


@dataclass(eq=False)
class LovResult:
    """LOV ensemble with diagnostics.

    ``corrections[j, n]`` is the correction term (variance units, or relative
    factor when multiplicative) applied to particle ``j`` at step ``n``.
    """

    ensemble: OccupiedEnsemble
    positivity: PositivityReport
    n_floored: int
    corrections: np.ndarray
    bandwidths: np.ndarray


def simulate_lov(cfg: SimConfig, lov: LovConfig, record=()) -> LovResult:
    """Step-synchronized particle simulation of the LOV model.

    The driving clock is replaced by the exponential clock of rate
    ``lov.kappa``.  Each step updates every particle's occupation, projects
    the occupations on the spots, evaluates the LOV variance and takes a
    log-Euler step.
    """
    if cfg.n_paths < 2:
        raise ConfigurationError("the particle method needs at least two paths")
    cfg = replace(cfg, clock=Clock.exponential(lov.kappa))
    report = check_positivity(lov, cfg.grid, cfg.times[:-1])
    if not report.passed:
        log.warning("positivity guard fails: worst ratio %.3g at t=%g, x=%g", report.worst_ratio, report.worst_time, report.worst_spot)
    vol = LovVolatility(lov, cfg.n_paths, cfg.n_steps)
    ens = euler_occupied(cfg, vol, record=record)
    return LovResult(ens, report, vol.n_floored, vol.corrections, np.asarray(vol.bandwidths))
