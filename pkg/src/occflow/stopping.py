"""Optimal stopping of the spot local time of Brownian motion.

The reward for stopping at ``tau`` is the local time of the path at its
current level, ``L_tau^{X_tau}``, estimated on a discrete path by the
corridor average ``(1 / 2 eps) * sum_{i <= n} 1{|X_i - X_n| <= eps} dt``
(sum over the sampled times ``t_1 .. t_n``).  Stopping at the horizon is
worth ``sqrt(2T/pi)``; the strategies here show how much early stopping adds.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_laguerre

from .errors import ConfigurationError, DomainError
from .occupation import DiscreteOccupation, local_time
from .pricing import mean_and_stderr
from .rng import normal_increments, trinomial_increments

__all__ = [
    "StoppingResult",
    "TrinomialLattice",
    "analytic_euro_value",
    "eps_expansion",
    "continuation_value",
    "path_continuation_value",
    "brownian_paths",
    "corridor_spot_local_time",
    "european_value",
    "two_date_value",
    "inspection_value",
    "inspection_rewards",
    "lsmc_value",
    "eps_sweep",
]

log = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass
class StoppingResult:
    """Value of a stopping strategy with its Monte Carlo error.

    ``exercise_frequency[n]`` is the fraction of paths stopped at step ``n``
    (stopping at the horizon included).  ``coefficients`` maps a step to the
    regression coefficients used there (regression strategies only).
    """

    value: float
    stderr: float
    strategy: str
    params: dict = field(default_factory=dict)
    exercise_frequency: np.ndarray | None = None
    coefficients: dict | None = None
    runtime: float = 0.0
    extras: dict = field(default_factory=dict)

    def __str__(self):
        return f"{self.strategy}: {self.value:.4f} +/- {self.stderr:.4f}"


def analytic_euro_value(T):
    """Value ``sqrt(2T/pi)`` of stopping at the horizon."""
    if T < 0:
        raise DomainError(f"horizon must be nonnegative, got {T}")
    return math.sqrt(2.0 * T / math.pi)


def eps_expansion(T, eps):
    """Second-order expansion of the corridor value at the horizon, ``sqrt(2T/pi) - eps/2 + eps^2/sqrt(18 pi T)``."""
    if not eps > 0:
        raise DomainError("corridor half-width must be positive")
    if not T > 0:
        raise DomainError("horizon must be positive")
    return analytic_euro_value(T) - eps / 2 + eps * eps / math.sqrt(18 * math.pi * T)


def _heat(s, d):
    return np.exp(-0.5 * d * d / s) / math.sqrt(2 * math.pi * s)


def continuation_value(occ: DiscreteOccupation, x, t, T, eps=None):
    """Expected terminal spot local time given the occupation and spot at ``t``.

    Bin masses are integrated against the heat kernel of the remaining time
    ``T - t`` at the bin nodes.  For ``t >= T`` a warning is issued and the
    spot local time is returned (corridor ``eps``, default the bin half-width).
    """
    x = np.asarray(x, dtype=float)
    if t >= T:
        warnings.warn("continuation requested at or after the horizon; returning the spot local time", stacklevel=2)
        if eps is None:
            eps = occ.grid.half_widths[occ.grid.locate(x)]
        return local_time(occ, x, eps)
    s = T - t
    kern = _heat(s, x[..., None] - occ.grid.nodes)
    return np.sum(kern * occ.masses, axis=-1) + analytic_euro_value(s)


def path_continuation_value(levels, n, dt, T):
    """Continuation value from the path atoms ``X_1 .. X_n`` (each of mass ``dt``).

    ``levels`` has shape ``(J, N+1)``; returns one value per path.
    """
    t = n * dt
    s = T - t
    if s <= 0:
        raise DomainError("no time left for continuation")
    x = levels[:, n : n + 1]
    return _heat(s, levels[:, 1 : n + 1] - x).sum(axis=1) * dt + analytic_euro_value(s)


def brownian_paths(T, N, J, seed=0, antithetic=True, stream=0, workers=None):
    """Standard Brownian paths from 0 on ``N`` equal steps, shape ``(J, N+1)``."""
    z = normal_increments(seed, J, N, antithetic=antithetic, stream=stream, workers=workers)
    X = np.zeros((J, N + 1))
    np.cumsum(z, axis=1, out=X[:, 1:])
    X[:, 1:] *= math.sqrt(T / N)
    return X


def corridor_spot_local_time(levels, n, eps, dt, level=None):
    """Corridor local time ``(1/2eps) sum_{i=1}^{n} 1{|X_i - level| <= eps} dt``.

    ``n`` is a step index or an array of per-path step indices; ``level``
    defaults to the spot ``X_n``.
    """
    J, width = levels.shape
    n = np.broadcast_to(np.asarray(n), (J,))
    rows = np.arange(J)
    if level is None:
        level = levels[rows, n]
    level = np.broadcast_to(np.asarray(level, dtype=float), (J,))
    steps = np.arange(width)
    inside = (np.abs(levels - level[:, None]) <= eps) & (steps >= 1) & (steps <= n[:, None])
    return inside.sum(axis=1) * dt / (2 * eps)


def european_value(T=1.0, N=1600, eps=0.05, J=2**14, seed=0, paths=None, antithetic=True):
    """Monte Carlo corridor value of stopping at the horizon.

    ``paths`` optionally supplies Brownian paths; ``antithetic`` then says
    whether they come in antithetic pairs.
    """
    t0 = time.perf_counter()
    X = brownian_paths(T, N, J, seed) if paths is None else paths
    dt = T / (X.shape[1] - 1)
    reward = corridor_spot_local_time(X, X.shape[1] - 1, eps, dt)
    m, se = mean_and_stderr(reward, antithetic=antithetic)
    return StoppingResult(
        m, se, "european", dict(T=T, N=X.shape[1] - 1, eps=eps, J=X.shape[0], seed=seed),
        runtime=time.perf_counter() - t0, extras={"reference": eps_expansion(T, eps)},
    )


def _snap(t, dt, N, name):
    n = int(round(t / dt))
    if not math.isclose(n * dt, t, rel_tol=1e-9, abs_tol=1e-12):
        warnings.warn(f"{name}={t} is not on the time grid; using t={n * dt}", stacklevel=3)
    return min(max(n, 0), N)


def two_date_value(T=1.0, t=0.5, N=400, eps=0.05, J=2**14, seed=0):
    """Stop at ``t`` or at ``T``, whichever the continuation value prefers.

    The value is the mean of ``max(intrinsic, continuation)`` at ``t``, with
    the continuation computed in closed form from the path atoms.
    """
    t0 = time.perf_counter()
    if not T > 0:
        raise DomainError("horizon must be positive")
    dt = T / N
    nt = _snap(t, dt, N, "t")
    X = brownian_paths(T, N, J, seed)
    intrinsic = corridor_spot_local_time(X, nt, eps, dt)
    if nt == N:
        cont = intrinsic
    elif nt == 0:
        cont = np.full(J, analytic_euro_value(T))
    else:
        cont = path_continuation_value(X, nt, dt, T)
    y = np.maximum(intrinsic, cont)
    m, se = mean_and_stderr(y, antithetic=True)
    freq = np.zeros(N + 1)
    stop = intrinsic >= cont
    freq[nt] = stop.mean()
    freq[N] += 1 - stop.mean()
    return StoppingResult(
        m, se, "two-date", dict(T=T, t=nt * dt, N=N, eps=eps, J=J, seed=seed), freq,
        runtime=time.perf_counter() - t0,
        extras={"continuation_mean": float(cont.mean()), "intrinsic_mean": float(intrinsic.mean())},
    )


def _argmax_levels(X, n_iota, eps, grid):
    """Per path, the grid level with the largest corridor occupation over steps ``1..n_iota``.

    Ties go to the smallest ``|x|``, then the smallest ``x``.
    """
    order = np.lexsort((grid, np.abs(grid)))
    g = grid[order]
    lo, hi = g - eps, g + eps
    out = np.empty(X.shape[0])
    seg = np.sort(X[:, 1 : n_iota + 1], axis=1)
    for j in range(X.shape[0]):
        row = seg[j]
        counts = np.searchsorted(row, hi, side="right") - np.searchsorted(row, lo, side="left")
        out[j] = g[np.argmax(counts)]
    return out


def inspection_rewards(X, T, iota, eps, space_grid=None, hit_rule="cross", hit_tol=None, reward_at="target"):
    """Per-path rewards of the inspection strategy on Brownian paths ``X``.

    At ``iota`` each path picks the level ``X*`` with the largest corridor
    occupation so far, then stops the first time it reaches ``X*`` again, or
    at ``T``.

    Parameters
    ----------
    hit_rule : {"cross", "tolerance"}
        ``"cross"``: the path reaches ``X*`` on ``(t_{n-1}, t_n]`` when the
        samples at both ends straddle it (or touch it); the stop is at ``t_n``.
        ``"tolerance"``: first sample within ``hit_tol`` of ``X*``.
    hit_tol : float, optional
        Tolerance of the ``"tolerance"`` rule; defaults to ``eps``.
    reward_at : {"target", "spot"}
        On a hit, evaluate the corridor local time at ``X*`` (where the
        continuous path is at the hitting time) or at the sampled spot.

    Returns
    -------
    rewards, stop_steps : ndarray
    """
    J, width = X.shape
    N = width - 1
    dt = T / N
    if space_grid is None:
        space_grid = np.linspace(-2.0, 2.0, 201)
    space_grid = np.asarray(space_grid, dtype=float)
    if reward_at not in ("target", "spot"):
        raise ConfigurationError("reward_at must be 'target' or 'spot'")
    n_iota = _snap(iota, dt, N, "iota")
    target = _argmax_levels(X, n_iota, eps, space_grid)
    d = X[:, n_iota:] - target[:, None]
    if hit_rule == "cross":
        near = d[:, :-1] * d[:, 1:] <= 0
        first = n_iota + 1 + np.argmax(near, axis=1)
    elif hit_rule == "tolerance":
        near = np.abs(d) <= (eps if hit_tol is None else hit_tol)
        first = n_iota + np.argmax(near, axis=1)
    else:
        raise ConfigurationError(f"unknown hit rule {hit_rule!r}")
    hit = near.any(axis=1)
    tau = np.where(hit, first, N)
    if reward_at == "target":
        level = np.where(hit, target, X[:, N])
        reward = corridor_spot_local_time(X, tau, eps, dt, level)
    else:
        reward = corridor_spot_local_time(X, tau, eps, dt)
    return reward, tau


def inspection_value(
    iota, T=1.0, N=400, eps=0.05, J=2**14, space_grid=None, seed=0,
    hit_rule="cross", hit_tol=None, reward_at="target", paths=None, antithetic=True,
):
    """Value of the inspection strategy (see :func:`inspection_rewards`)."""
    t0 = time.perf_counter()
    if not 0 < iota < T:
        raise DomainError("inspection date must lie strictly inside (0, T)")
    X = brownian_paths(T, N, J, seed) if paths is None else paths
    reward, tau = inspection_rewards(X, T, iota, eps, space_grid, hit_rule, hit_tol, reward_at)
    m, se = mean_and_stderr(reward, antithetic=antithetic)
    freq = np.bincount(tau, minlength=X.shape[1]) / X.shape[0]
    return StoppingResult(
        m, se, "inspection", dict(iota=iota, T=T, N=X.shape[1] - 1, eps=eps, J=X.shape[0], seed=seed),
        freq, runtime=time.perf_counter() - t0, extras={"hit_rate": float((tau < X.shape[1] - 1).mean())},
    )


@dataclass(frozen=True)
class TrinomialLattice:
    """Trinomial walk with steps ``{-1, 0, 1} * sqrt(3 dt)`` and probabilities ``(1/6, 2/3, 1/6)``.

    Increments have mean 0, variance ``dt`` and match the first five moments
    of ``N(0, dt)``.  Node ``m`` sits at ``m * spacing``; corridors of
    half-width ``spacing / 2`` around nodes tile the line, so the corridor
    local time at a node is ``(dt / 2 eps) * visits``.
    """

    T: float = 1.0
    N: int = 400

    def __post_init__(self):
        if not self.T > 0 or self.N < 1:
            raise ConfigurationError("lattice needs T > 0 and N >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def spacing(self) -> float:
        return math.sqrt(3 * self.dt)

    @property
    def eps(self) -> float:
        return self.spacing / 2

    @property
    def lt_scale(self) -> float:
        return self.dt / (2 * self.eps)

    def node_paths(self, J, seed=0, antithetic=True, stream=0, workers=None):
        """Node indices ``m_0 = 0, m_1, .., m_N`` per path as ``int16``."""
        d = trinomial_increments(seed, J, self.N, antithetic=antithetic, stream=stream, workers=workers)
        m = np.zeros((J, self.N + 1), dtype=np.int16)
        np.cumsum(d, axis=1, dtype=np.int16, out=m[:, 1:])
        return m


def _features(lt, xbar, weighted):
    cols = [np.ones(lt.shape[0])]
    for v in list(lt.T) + [xbar]:
        if weighted:
            w = np.exp(-0.5 * v)
            cols.extend(w * eval_laguerre(k, v) for k in range(4))
        else:
            cols.extend(eval_laguerre(k, v) for k in range(1, 4))
    return np.column_stack(cols)


def _fit(F, y):
    beta, _, rank, _ = np.linalg.lstsq(F, y, rcond=None)
    if rank < F.shape[1]:
        A = F.T @ F
        lam = 1e-8 * np.trace(A) / F.shape[1]
        log.info("singular regression (rank %d of %d); ridge with lambda=%.3g", rank, F.shape[1], lam)
        beta = np.linalg.solve(A + lam * np.eye(F.shape[1]), F.T @ y)
    return beta


def lsmc_value(mbar, N=400, J_off=2**11, J_on=2**14, T=1.0, seed=0, weighted=False):
    """Regression Monte Carlo on the trinomial lattice with truncated occupation features.

    The regression at step ``n`` uses the corridor local times at the
    ``2 mbar + 1`` nodes around the spot and the transformed spot ``exp(X)``,
    each through Laguerre polynomials of degree 1 to 3, plus an intercept.
    Only paths with ``|m| <= n - mbar`` may stop.  Coefficients are fitted on
    ``J_off`` paths and applied to ``J_on`` fresh ones.
    """
    t0 = time.perf_counter()
    if mbar < 0 or mbar >= N:
        raise ConfigurationError("truncation radius must lie in [0, N)")
    lat = TrinomialLattice(T, N)
    scale = lat.lt_scale
    off = N + mbar
    window = np.arange(-mbar, mbar + 1)
    last = max(mbar, 1)

    # offline: backward induction
    m = lat.node_paths(J_off, seed, stream=0)
    rows = np.arange(J_off)
    counts = np.zeros((J_off, 2 * off + 1), dtype=np.int32)
    for n in range(1, N + 1):
        counts[rows, m[:, n] + off] += 1
    y = counts[rows, m[:, N] + off] * scale
    betas = {}
    for n in range(N - 1, last - 1, -1):
        counts[rows, m[:, n + 1] + off] -= 1
        mn = m[:, n].astype(np.int64)
        elig = np.abs(mn) <= n - mbar
        if not elig.any():
            continue
        idx = np.flatnonzero(elig)
        lt = counts[idx[:, None], mn[idx, None] + off + window] * scale
        F = _features(lt, np.exp(mn[idx] * lat.spacing), weighted)
        beta = _fit(F, y[idx])
        betas[n] = beta
        intrinsic = lt[:, mbar]
        stop = intrinsic >= F @ beta
        y[idx[stop]] = intrinsic[stop]
    off_mean, off_se = mean_and_stderr(y, antithetic=True)

    # online: forward pass with frozen coefficients
    m = lat.node_paths(J_on, seed, stream=1)
    rows = np.arange(J_on)
    counts = np.zeros((J_on, 2 * off + 1), dtype=np.int32)
    reward = np.zeros(J_on)
    alive = np.ones(J_on, dtype=bool)
    stop_step = np.full(J_on, N)
    for n in range(1, N):
        counts[rows, m[:, n] + off] += 1
        beta = betas.get(n)
        if beta is None:
            continue
        mn = m[:, n].astype(np.int64)
        idx = np.flatnonzero(alive & (np.abs(mn) <= n - mbar))
        if idx.size == 0:
            continue
        lt = counts[idx[:, None], mn[idx, None] + off + window] * scale
        F = _features(lt, np.exp(mn[idx] * lat.spacing), weighted)
        intrinsic = lt[:, mbar]
        stop = intrinsic >= F @ beta
        s = idx[stop]
        reward[s] = intrinsic[stop]
        alive[s] = False
        stop_step[s] = n
    counts[rows, m[:, N] + off] += 1
    reward[alive] = counts[rows[alive], m[alive, N] + off] * scale
    val, se = mean_and_stderr(reward, antithetic=True)
    freq = np.bincount(stop_step, minlength=N + 1) / J_on
    return StoppingResult(
        val, se, "lsmc", dict(mbar=mbar, N=N, J_off=J_off, J_on=J_on, T=T, seed=seed, weighted=weighted),
        freq, betas, time.perf_counter() - t0, {"offline_value": off_mean, "offline_stderr": off_se},
    )


def eps_sweep(strategy, eps_list, T=1.0, N=400, J=2**14, seed=0, iota=0.7):
    """Values for several corridor half-widths on one set of paths.

    ``strategy`` is ``"european"`` or ``"inspection"``.  Returns a list of
    :class:`StoppingResult`; European results carry the expansion in
    ``extras["reference"]``.
    """
    eps_list = [float(e) for e in eps_list]
    if any(not 0 < e <= 1 for e in eps_list):
        raise DomainError("corridor half-widths must lie in (0, 1]")
    if strategy not in ("european", "inspection"):
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    X = brownian_paths(T, N, J, seed)
    out = []
    for e in eps_list:
        if strategy == "european":
            r = european_value(T, N, e, J, seed, paths=X)
        else:
            r = inspection_value(iota, T, N, e, J, seed=seed, paths=X)
        out.append(r)
    return out
