"""Path generation: Brownian baselines and the occupied log-Euler scheme.

The occupied scheme advances the pair (occupation, level) of every path in
lockstep.  Each step does, in this order:

1. add the clock increment at the current level to the occupation,
2. evaluate the volatility from the updated occupation and the spot,
3. take the exact conditional lognormal step with that volatility.

Volatility functionals are plain callables ``vol(occ, x, t)`` that receive the
whole batch of occupations and spots and return one volatility per path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, DimensionError, EmptyOccupationError, SimulationError
from .occupation import Clock, CorridorGrid, DiscreteOccupation, make_grid
from .rng import normal_increments

__all__ = [
    "SimConfig",
    "OccupiedEnsemble",
    "OccupiedPath",
    "ConstantVol",
    "LocalVol",
    "LocalVolTable",
    "GuyonToyVol",
    "simulate_bm",
    "euler_occupied",
    "guyon_toy_vol",
    "ema",
    "read_local_vol_csv",
    "write_local_vol_csv",
]


@dataclass(frozen=True)
class SimConfig:
    """Time grid, ensemble size and market data of a simulation.

    ``grid`` defaults to 41 bins spanning ``x0 +/- x0/2`` (or ``+/- 3`` when
    ``x0 = 0``).
    """

    horizon: float = 1.0
    n_steps: int = 100
    n_paths: int = 1000
    seed: int = 0
    antithetic: bool = False
    rate: float = 0.0
    dividend: float = 0.0
    x0: float = 1.0
    clock: Clock = field(default_factory=Clock.calendar)
    grid: CorridorGrid | None = None
    workers: int | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be a positive integer, got {self.n_steps}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigurationError(f"n_paths must be a positive integer, got {self.n_paths}")
        if self.antithetic and self.n_paths % 2:
            raise ConfigurationError("antithetic sampling needs an even number of paths")
        if self.seed < 0:
            raise ConfigurationError("seed must be nonnegative")
        if self.grid is None:
            span = abs(self.x0) / 2 if self.x0 != 0 else 3.0
            object.__setattr__(self, "grid", make_grid(self.x0, span, 41))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass(eq=False)
class OccupiedPath:
    """One trajectory with its occupations (unbatched)."""

    times: np.ndarray
    levels: np.ndarray
    vols: np.ndarray
    occupations: dict
    snapshots: dict = field(default_factory=dict)
    rate: float = 0.0
    dividend: float = 0.0

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(eq=False)
class OccupiedEnsemble:
    """An ensemble of trajectories, stored as arrays with a leading path axis.

    ``levels`` has shape ``(J, N+1)`` and ``vols`` shape ``(J, N)``;
    ``occupations`` maps a clock name to a batched terminal occupation and
    ``snapshots`` maps a step index ``k`` to the driving occupation over
    ``[0, t_k)``.
    """

    times: np.ndarray
    levels: np.ndarray
    vols: np.ndarray
    occupations: dict
    snapshots: dict = field(default_factory=dict)
    antithetic: bool = False
    rate: float = 0.0
    dividend: float = 0.0
    driver: str = "calendar"

    @property
    def n_paths(self) -> int:
        return self.levels.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def occupation(self) -> DiscreteOccupation:
        """Occupation under the driving clock."""
        return self.occupations[self.driver]

    def path(self, j: int) -> OccupiedPath:
        return OccupiedPath(
            self.times,
            self.levels[j],
            self.vols[j],
            {k: o[j] for k, o in self.occupations.items()},
            {k: o[j] for k, o in self.snapshots.items()},
            self.rate,
            self.dividend,
        )

    def __len__(self):
        return self.n_paths


# volatility functionals


@dataclass(frozen=True)
class ConstantVol:
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigurationError("volatility must be nonnegative")

    def __call__(self, occ, x, t):
        return np.full(np.shape(x), float(self.sigma))


@dataclass(frozen=True, eq=False)
class LocalVolTable:
    """Bilinear interpolation of a ``(t, x)`` volatility table, flat outside."""

    times: np.ndarray
    levels: np.ndarray
    vols: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.levels, dtype=float)
        v = np.asarray(self.vols, dtype=float)
        if v.shape != (t.size, x.size):
            raise DimensionError(f"vol table has shape {v.shape}, expected {(t.size, x.size)}")
        if not (np.all(np.diff(t) > 0) and np.all(np.diff(x) > 0)):
            raise ConfigurationError("table axes must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ConfigurationError("local volatilities must be finite and positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "levels", x)
        object.__setattr__(self, "vols", v)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        tt, xx = np.broadcast_arrays(t, x)
        if self.times.size == 1:
            return np.interp(xx, self.levels, self.vols[0])
        interp = RegularGridInterpolator((self.times, self.levels), self.vols)
        pts = np.stack(
            [np.clip(tt, self.times[0], self.times[-1]), np.clip(xx, self.levels[0], self.levels[-1])],
            axis=-1,
        )
        return interp(pts.reshape(-1, 2)).reshape(tt.shape)

    @property
    def floor(self) -> float:
        return float(self.vols.min())


@dataclass(frozen=True, eq=False)
class LocalVol:
    """Occupation-blind volatility ``sigma_loc(t, x)``.

    ``surface`` is any callable ``(t, x) -> vol``, e.g. a :class:`LocalVolTable`.
    """

    surface: object

    def __call__(self, occ, x, t):
        return np.broadcast_to(np.asarray(self.surface(t, x), dtype=float), np.shape(x)).copy()


def ema(occ: DiscreteOccupation) -> np.ndarray:
    """Barycenter ``first_moment / total_mass`` of the occupation."""
    mass = np.asarray(occ.total_mass)
    if np.any(mass <= 0):
        raise EmptyOccupationError("moving average of an empty occupation is undefined")
    return occ.first_moment / mass


def guyon_toy_vol(occ, x, alpha=2.1, beta=1.2, gamma=1.9, x0=None, cap=None):
    """Toy volatility ``-alpha/beta + gamma * U**(-beta)``, ``U = x / EMA``, floored at 0.

    Paths with an empty occupation use ``x0`` as their moving average.  The
    model is explosive: a path far below its average gets a huge volatility,
    which drives it further down.  ``cap`` optionally bounds the output.
    """
    x = np.asarray(x, dtype=float)
    mass = np.asarray(occ.total_mass)
    empty = mass <= 0
    if np.any(empty) and x0 is None:
        raise EmptyOccupationError("empty occupation and no initial level supplied")
    avg = np.where(empty, x0 if x0 is not None else 1.0, occ.first_moment / np.where(empty, 1.0, mass))
    ratio = x / avg
    if np.any(ratio < 0):
        raise SimulationError("trend ratio must be nonnegative", state={"ratio_min": float(np.min(ratio))})
    with np.errstate(divide="ignore", over="ignore"):
        out = np.maximum(-alpha / beta + gamma * ratio ** (-beta), 0.0)
    return out if cap is None else np.minimum(out, cap)


@dataclass(frozen=True)
class GuyonToyVol:
    alpha: float = 2.1
    beta: float = 1.2
    gamma: float = 1.9
    x0: float = 100.0
    cap: float | None = None

    def __call__(self, occ, x, t):
        return guyon_toy_vol(occ, x, self.alpha, self.beta, self.gamma, self.x0, self.cap)


# engines


def simulate_bm(cfg: SimConfig, record=()) -> OccupiedEnsemble:
    """Arithmetic Brownian paths ``X_{n+1} = X_n + sqrt(dt) Z`` (unit volatility)."""
    z = normal_increments(cfg.seed, cfg.n_paths, cfg.n_steps, antithetic=cfg.antithetic, workers=cfg.workers)
    levels = np.empty((cfg.n_paths, cfg.n_steps + 1))
    levels[:, 0] = cfg.x0
    np.cumsum(np.sqrt(cfg.dt) * z, axis=1, out=levels[:, 1:])
    levels[:, 1:] += cfg.x0
    vols = np.ones((cfg.n_paths, cfg.n_steps))
    times = cfg.times
    clocks = _clock_list(cfg.clock, record)
    occs = {c.name: DiscreteOccupation.empty(cfg.grid, cfg.n_paths) for c in clocks}
    for n in range(cfg.n_steps):
        for c in clocks:
            occs[c.name].accumulate(levels[:, n], c.increment(times[n], cfg.dt, vols[:, n]))
    for o in occs.values():
        o.touch(levels[:, -1])
    return OccupiedEnsemble(
        times, levels, vols, occs, antithetic=cfg.antithetic, rate=cfg.rate, dividend=cfg.dividend, driver=cfg.clock.name
    )


def _clock_list(driver, record):
    clocks = [driver]
    for c in record:
        if isinstance(c, str):
            c = Clock(c)
        if c.name not in {k.name for k in clocks}:
            clocks.append(c)
    return clocks


def euler_occupied(cfg: SimConfig, vol, record=(), snapshot_steps=(), hook=None) -> OccupiedEnsemble:
    """Occupied log-Euler scheme.

    Parameters
    ----------
    cfg : SimConfig
        ``cfg.clock`` drives the occupation that ``vol`` reads.
    vol : callable
        ``vol(occ, x, t)`` returning one nonnegative volatility per path.
    record : sequence of Clock or str
        Additional clocks to accumulate alongside (e.g. ``"calendar"`` or
        ``"quadratic"`` for payoffs).  Recorded quadratic clocks use the
        volatility of the step they weight; a quadratic *driving* clock uses
        the previous step's volatility, since the current one is not yet known.
    snapshot_steps : iterable of int
        Steps ``k`` at which to keep a copy of the driving occupation over ``[0, t_k)``.
    hook : callable, optional
        Called as ``hook(n, t, occ, x, sigma)`` after the volatility of step
        ``n`` is known.  Used by ensemble methods needing a per-step barrier.

    Returns
    -------
    OccupiedEnsemble
    """
    J, N, dt = cfg.n_paths, cfg.n_steps, cfg.dt
    times = cfg.times
    z = normal_increments(cfg.seed, J, N, antithetic=cfg.antithetic, workers=cfg.workers)
    snapshot_steps = set(int(k) for k in snapshot_steps)
    if any(k < 0 or k > N for k in snapshot_steps):
        raise ConfigurationError(f"snapshot steps must lie in [0, {N}]")
    driver = cfg.clock
    extra = [c for c in _clock_list(driver, record)[1:]]
    occ = DiscreteOccupation.empty(cfg.grid, J)
    rec = {c.name: DiscreteOccupation.empty(cfg.grid, J) for c in extra}
    levels = np.empty((J, N + 1))
    vols = np.empty((J, N))
    x = np.full(J, float(cfg.x0))
    levels[:, 0] = x
    drift = cfg.rate - cfg.dividend
    snaps = {}
    if 0 in snapshot_steps:
        snaps[0] = occ.copy()
    prev = None
    sqdt = np.sqrt(dt)
    for n in range(N):
        t = times[n]
        if driver.needs_vol and prev is None:
            prev = _checked(vol(occ, x, t), n, J, x)
        occ.accumulate(x, driver.increment(t, dt, prev))
        sigma = _checked(vol(occ, x, t), n, J, x)
        if hook is not None:
            hook(n, t, occ, x, sigma)
        for c in extra:
            rec[c.name].accumulate(x, c.increment(t, dt, sigma))
        x = x * np.exp(sigma * sqdt * z[:, n] + (drift - 0.5 * sigma * sigma) * dt)
        levels[:, n + 1] = x
        vols[:, n] = sigma
        prev = sigma
        if n + 1 in snapshot_steps:
            snaps[n + 1] = occ.copy()
    occ.touch(x)
    for o in rec.values():
        o.touch(x)
    occs = {driver.name: occ, **rec}
    return OccupiedEnsemble(
        times, levels, vols, occs, snaps, cfg.antithetic, cfg.rate, cfg.dividend, driver.name
    )


def _checked(sigma, n, J, x):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (J,):
        sigma = np.broadcast_to(sigma, (J,)).astype(float)
    bad = ~np.isfinite(sigma) | (sigma < 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise SimulationError(
            f"invalid volatility {sigma[j]!r} at step {n}, path {j}",
            step=n,
            path=j,
            state={"level": float(x[j]), "vol": float(sigma[j])},
        )
    return sigma


# local-vol table I/O


def read_local_vol_csv(path) -> LocalVolTable:
    """Read a ``t,x,vol`` table (one row per grid point, full rectangular grid)."""
    data = np.genfromtxt(Path(path), delimiter=",", names=True, comments="#")
    if data.dtype.names is None or set(data.dtype.names) != {"t", "x", "vol"}:
        raise ConfigurationError(f"{path}: expected columns t,x,vol")
    data = np.atleast_1d(data)
    if any(np.isnan(data[c]).any() for c in ("t", "x", "vol")):
        raise ConfigurationError(f"{path}: non-numeric entries")
    ts = np.unique(data["t"])
    xs = np.unique(data["x"])
    if data.size != ts.size * xs.size:
        raise ConfigurationError(f"{path}: table is not a full (t, x) grid")
    vols = np.full((ts.size, xs.size), np.nan)
    vols[np.searchsorted(ts, data["t"]), np.searchsorted(xs, data["x"])] = data["vol"]
    if np.isnan(vols).any():
        raise ConfigurationError(f"{path}: duplicate or missing (t, x) points")
    return LocalVolTable(ts, xs, vols)


def write_local_vol_csv(table: LocalVolTable, path) -> None:
    lines = ["t,x,vol"]
    for i, t in enumerate(table.times):
        for k, x in enumerate(table.levels):
            lines.append(f"{float(t)!r},{float(x)!r},{float(table.vols[i, k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")
