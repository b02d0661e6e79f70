"""Discretized occupation measures.

An occupation measure records how much clock time a path has spent at each
level.  Here it is stored on a :class:`CorridorGrid` (one accumulator per bin)
together with exact side-accumulators for the total mass, the first moment
and the visited range, so that linear and extremal functionals are free of
binning error.

All containers carry an optional leading batch shape so that a whole Monte
Carlo ensemble can be updated with one vectorized call per time step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    EmptyOccupationError,
)

__all__ = [
    "CorridorGrid",
    "Clock",
    "DiscreteOccupation",
    "LocalTimeQuery",
    "TimePermutation",
    "make_grid",
    "accumulate",
    "occupation_from_path",
    "local_time",
    "spot_local_time",
    "interval_mass",
    "occupation_integral",
    "metric",
    "support_bounds",
    "shuffle_path",
    "write_occupation_csv",
    "read_occupation_csv",
    "parse_occupation_csv",
]


@dataclass(frozen=True, eq=False)
class CorridorGrid:
    """Level partition ``C_m = [edges[m], edges[m+1])`` around the nodes.

    Inner edges are the midpoints between consecutive nodes.  The two outer
    edges are nominal (used for widths and densities); for lookup, levels
    below/above the grid fall into the first/last bin.
    """

    nodes: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        edges = np.asarray(self.edges, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ConfigurationError("grid needs at least one node")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("grid nodes must be strictly increasing")
        if edges.shape != (nodes.size + 1,) or np.any(np.diff(edges) <= 0):
            raise ConfigurationError("grid edges must be increasing, one more than nodes")
        nodes.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_nodes(cls, nodes, outer_half_width: float | None = None) -> "CorridorGrid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.size == 1:
            if outer_half_width is None or outer_half_width <= 0:
                raise ConfigurationError("a one-node grid needs a positive outer half-width")
            return cls(nodes, np.array([nodes[0] - outer_half_width, nodes[0] + outer_half_width]))
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        lo = outer_half_width if outer_half_width is not None else mid[0] - nodes[0]
        hi = outer_half_width if outer_half_width is not None else nodes[-1] - mid[-1]
        return cls(nodes, np.concatenate([[nodes[0] - lo], mid, [nodes[-1] + hi]]))

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def half_widths(self) -> np.ndarray:
        """Right half-width of each node, ``(x_{m+1} - x_m) / 2``."""
        return self.edges[1:] - self.nodes

    def locate(self, level) -> np.ndarray:
        """Bin index of each level; half-open bins, out-of-range levels clamp to the edge bins."""
        return np.searchsorted(self.edges[1:-1], level, side="right")

    def same_as(self, other: "CorridorGrid") -> bool:
        return self is other or (
            self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.edges, other.edges)
        )


def make_grid(center: float, half_span: float, n_bins: int) -> CorridorGrid:
    """Equally spaced grid of ``n_bins`` nodes covering ``[center - half_span, center + half_span]``.

    ``n_bins`` must be odd so that ``center`` is a node.
    """
    if not half_span > 0:
        raise ConfigurationError(f"half_span must be positive, got {half_span}")
    if int(n_bins) != n_bins or n_bins < 1 or n_bins % 2 == 0:
        raise ConfigurationError(f"n_bins must be a positive odd integer, got {n_bins}")
    n_bins = int(n_bins)
    if n_bins == 1:
        return CorridorGrid.from_nodes([center], outer_half_width=half_span)
    nodes = np.linspace(center - half_span, center + half_span, n_bins)
    nodes[n_bins // 2] = center
    return CorridorGrid.from_nodes(nodes)


@dataclass(frozen=True)
class Clock:
    """Clock driving the occupation: calendar ``dt``, exponential ``e^{kt} dt`` or quadratic ``vol^2 dt``."""

    kind: str = "calendar"
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("calendar", "exponential", "quadratic"):
            raise ConfigurationError(f"unknown clock kind {self.kind!r}")
        if not self.kappa >= 0:
            raise ConfigurationError(f"clock rate kappa must be >= 0, got {self.kappa}")
        if self.kind != "exponential" and self.kappa != 0:
            raise ConfigurationError("only the exponential clock takes a rate")

    @classmethod
    def calendar(cls) -> "Clock":
        return cls("calendar")

    @classmethod
    def exponential(cls, kappa: float) -> "Clock":
        return cls("exponential", float(kappa))

    @classmethod
    def quadratic(cls) -> "Clock":
        return cls("quadratic")

    @property
    def name(self) -> str:
        if self.kind == "exponential":
            return f"exponential({self.kappa:g})"
        return self.kind

    @property
    def needs_vol(self) -> bool:
        return self.kind == "quadratic"

    def increment(self, t, dt, vol=None):
        if self.kind == "calendar":
            return dt
        if self.kind == "exponential":
            return np.exp(self.kappa * t) * dt
        if vol is None:
            raise ConfigurationError("the quadratic clock needs the step volatility")
        return np.square(vol) * dt


@dataclass(frozen=True)
class LocalTimeQuery:
    level: float
    corridor_half_width: float

    def __post_init__(self):
        if not self.corridor_half_width > 0:
            raise DomainError("corridor half-width must be positive")


@dataclass(eq=False)
class DiscreteOccupation:
    """Binned occupation measure with exact mass, first-moment and range accumulators.

    Arrays carry a leading ``batch_shape`` (``()`` for a single path); ``masses``
    has shape ``batch_shape + (grid.size,)``.  An empty range is encoded as
    ``lo = +inf, hi = -inf``.
    """

    grid: CorridorGrid
    masses: np.ndarray
    total_mass: np.ndarray
    first_moment: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def empty(cls, grid: CorridorGrid, batch_shape=(), start=None) -> "DiscreteOccupation":
        if isinstance(batch_shape, (int, np.integer)):
            batch_shape = (int(batch_shape),)
        batch_shape = tuple(int(b) for b in batch_shape)
        occ = cls(
            grid=grid,
            masses=np.zeros(batch_shape + (grid.size,)),
            total_mass=np.zeros(batch_shape),
            first_moment=np.zeros(batch_shape),
            lo=np.full(batch_shape, np.inf),
            hi=np.full(batch_shape, -np.inf),
        )
        if start is not None:
            occ.touch(start)
        return occ

    @property
    def batch_shape(self) -> tuple:
        return self.total_mass.shape

    @property
    def is_empty(self) -> np.ndarray:
        return self.lo > self.hi

    def copy(self) -> "DiscreteOccupation":
        return DiscreteOccupation(
            self.grid,
            self.masses.copy(),
            self.total_mass.copy(),
            self.first_moment.copy(),
            self.lo.copy(),
            self.hi.copy(),
        )

    def __getitem__(self, idx) -> "DiscreteOccupation":
        return DiscreteOccupation(
            self.grid,
            self.masses[idx],
            self.total_mass[idx],
            self.first_moment[idx],
            self.lo[idx],
            self.hi[idx],
        )

    def __add__(self, other: "DiscreteOccupation") -> "DiscreteOccupation":
        _check_same_grid(self, other)
        return DiscreteOccupation(
            self.grid,
            self.masses + other.masses,
            self.total_mass + other.total_mass,
            self.first_moment + other.first_moment,
            np.minimum(self.lo, other.lo),
            np.maximum(self.hi, other.hi),
        )

    def touch(self, level) -> "DiscreteOccupation":
        """Record ``level`` in the range without adding mass."""
        level = np.broadcast_to(np.asarray(level, dtype=float), self.batch_shape)
        np.minimum(self.lo, level, out=self.lo)
        np.maximum(self.hi, level, out=self.hi)
        return self

    def accumulate(self, level, weight) -> "DiscreteOccupation":
        """Add ``weight`` clock units at ``level`` (in place, vectorized over the batch)."""
        shape = self.batch_shape
        level = np.broadcast_to(np.asarray(level, dtype=float), shape)
        weight = np.broadcast_to(np.asarray(weight, dtype=float), shape)
        if np.any(weight < 0):
            raise DomainError("occupation weights must be nonnegative")
        bins = self.grid.locate(level)
        if shape == ():
            self.masses[bins] += weight
        else:
            self.masses[np.indices(shape, sparse=True) + (bins,)] += weight
        self.total_mass += weight
        self.first_moment += level * weight
        hit = weight > 0
        np.minimum(self.lo, np.where(hit, level, np.inf), out=self.lo)
        np.maximum(self.hi, np.where(hit, level, -np.inf), out=self.hi)
        return self


def accumulate(occ: DiscreteOccupation, level, weight) -> DiscreteOccupation:
    """In-place accumulation; returns ``occ`` for chaining."""
    return occ.accumulate(level, weight)


def _check_same_grid(a: DiscreteOccupation, b: DiscreteOccupation):
    if not a.grid.same_as(b.grid):
        raise DimensionError("occupations live on different grids")


def occupation_from_path(times, levels, clock: Clock, grid: CorridorGrid, vols=None) -> DiscreteOccupation:
    """Left-endpoint occupation of sampled path(s).

    ``levels`` has shape ``(..., N+1)`` on the time grid ``times`` (length
    ``N+1``).  Step ``n`` adds the clock increment over ``[t_n, t_{n+1})`` at
    ``X_{t_n}``; the terminal level only enters the range accumulator.
    """
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if times.ndim != 1 or levels.shape[-1] != times.size:
        raise DimensionError("levels must end with an axis matching times")
    n_steps = times.size - 1
    if clock.needs_vol:
        if vols is None:
            raise DimensionError("the quadratic clock needs a volatility record")
        vols = np.asarray(vols, dtype=float)
        if vols.shape[-1] != n_steps:
            raise DimensionError(
                f"volatility record has {vols.shape[-1]} steps, path has {n_steps}"
            )
    occ = DiscreteOccupation.empty(grid, levels.shape[:-1])
    dts = np.diff(times)
    for n in range(n_steps):
        vol = vols[..., n] if clock.needs_vol else None
        occ.accumulate(levels[..., n], clock.increment(times[n], dts[n], vol))
    occ.touch(levels[..., -1])
    return occ


def interval_mass(occ: DiscreteOccupation, lo, hi) -> np.ndarray:
    """Mass of ``[lo, hi)`` with uniform pro-rating inside partially covered bins.

    A bound beyond the outer nominal edge covers the edge bin completely, so
    mass absorbed from out-of-grid levels is counted.  ``(-inf, inf)`` returns
    the exact total mass.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.all(np.isneginf(lo)) and np.all(np.isposinf(hi)):
        return np.broadcast_to(occ.total_mass, np.broadcast_shapes(occ.batch_shape, lo.shape)).copy()
    edges = occ.grid.edges
    left, right = edges[:-1], edges[1:]
    lo_c = np.clip(lo, edges[0], edges[-1])[..., None]
    hi_c = np.clip(hi, edges[0], edges[-1])[..., None]
    overlap = np.clip(np.minimum(hi_c, right) - np.maximum(lo_c, left), 0.0, None)
    frac = overlap / (right - left)
    return np.sum(frac * occ.masses, axis=-1)


def local_time(occ: DiscreteOccupation, level, eps: float) -> np.ndarray:
    """Corridor estimate ``O(B_eps(level)) / (2 eps)`` of the local time at ``level``."""
    if isinstance(level, LocalTimeQuery):
        level, eps = level.level, level.corridor_half_width
    if not eps > 0:
        raise DomainError(f"corridor half-width must be positive, got {eps}")
    level = np.asarray(level, dtype=float)
    return interval_mass(occ, level - eps, level + eps) / (2.0 * eps)


def spot_local_time(occ: DiscreteOccupation, spot, eps: float) -> np.ndarray:
    """Local time at the current level, the reward of the spot-local-time stopping problem."""
    return local_time(occ, spot, eps)


Integrand = Union[float, str, Callable[[np.ndarray], np.ndarray]]


def occupation_integral(occ: DiscreteOccupation, phi: Integrand) -> np.ndarray:
    """``sum_m phi(x_m) O_m``.

    Pass a number for a constant integrand or ``"identity"`` for ``phi(x) = x``;
    both use the exact accumulators instead of the bins.
    """
    if isinstance(phi, str):
        if phi != "identity":
            raise ConfigurationError(f"unknown integrand {phi!r}")
        return occ.first_moment.copy()
    if np.isscalar(phi):
        return phi * occ.total_mass
    values = np.asarray(phi(occ.grid.nodes), dtype=float)
    return occ.masses @ values if values.ndim == 1 else np.sum(values * occ.masses, axis=-1)


def metric(occ1: DiscreteOccupation, occ2: DiscreteOccupation, p=1) -> np.ndarray:
    """Distance between binned measures: total variation (``p=1``) or sup density gap (``p=inf``)."""
    _check_same_grid(occ1, occ2)
    diff = np.abs(occ1.masses - occ2.masses)
    if p == 1:
        return diff.sum(axis=-1)
    if p == math.inf or p == "inf":
        return np.max(diff / occ1.grid.widths, axis=-1)
    raise ConfigurationError(f"only p in {{1, inf}} is supported, got {p}")


def support_bounds(occ: DiscreteOccupation):
    """Exact ``(min, max)`` of the levels visited so far."""
    if np.any(occ.is_empty):
        raise EmptyOccupationError("support of an empty occupation is undefined")
    if occ.batch_shape == ():
        return float(occ.lo), float(occ.hi)
    return occ.lo.copy(), occ.hi.copy()


@dataclass(frozen=True)
class TimePermutation:
    """Block permutation of a path: new block ``n`` is old block ``order[n]``, reversed when ``signs[n] == -1``.

    Block indices are 0-based.
    """

    order: tuple
    signs: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        signs = tuple(int(s) for s in self.signs)
        if sorted(order) != list(range(len(order))):
            raise ConfigurationError(f"{order} is not a permutation of 0..{len(order) - 1}")
        if len(signs) != len(order) or any(s not in (-1, 1) for s in signs):
            raise ConfigurationError("signs must be +1/-1, one per block")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "signs", signs)

    @property
    def n_blocks(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, n_blocks: int) -> "TimePermutation":
        return cls(tuple(range(n_blocks)), (1,) * n_blocks)

    @classmethod
    def random(cls, n_blocks: int, rng: np.random.Generator) -> "TimePermutation":
        return cls(tuple(rng.permutation(n_blocks)), tuple(rng.choice([-1, 1], n_blocks)))

    def inverse(self) -> "TimePermutation":
        inv = np.argsort(self.order)
        return TimePermutation(tuple(inv), tuple(self.signs[k] for k in inv))


def shuffle_path(path, perm: TimePermutation) -> np.ndarray:
    """Reorder (and possibly reverse) equal-length blocks along the last axis."""
    path = np.asarray(path)
    length = path.shape[-1]
    if length % perm.n_blocks:
        raise DimensionError(f"path length {length} is not divisible into {perm.n_blocks} blocks")
    blocks = path.reshape(path.shape[:-1] + (perm.n_blocks, length // perm.n_blocks))
    out = blocks[..., list(perm.order), :].copy()
    for n, s in enumerate(perm.signs):
        if s < 0:
            out[..., n, :] = out[..., n, ::-1]
    return out.reshape(path.shape)


def write_occupation_csv(occ: DiscreteOccupation, target) -> str:
    """Write a single-path occupation as ``node,mass`` rows plus a trailer comment.

    ``target`` may be a path or ``None`` (the CSV text is returned either way).
    """
    if occ.batch_shape != ():
        raise DimensionError("CSV export takes a single-path occupation")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["node", "mass"])
    for x, m in zip(occ.grid.nodes, occ.masses):
        writer.writerow([repr(float(x)), repr(float(m))])
    buf.write(
        f"# total_mass={float(occ.total_mass)!r},first_moment={float(occ.first_moment)!r},"
        f"min={float(occ.lo)!r},max={float(occ.hi)!r}\n"
    )
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def read_occupation_csv(source, grid: CorridorGrid | None = None) -> DiscreteOccupation:
    """Inverse of :func:`write_occupation_csv`; ``source`` is a file path."""
    return parse_occupation_csv(Path(source).read_text(), grid)


def parse_occupation_csv(text: str, grid: CorridorGrid | None = None) -> DiscreteOccupation:
    """Parse CSV text; without ``grid`` the nodes come from the file and edges are midpoints."""
    lines = text.splitlines()
    rows = [ln for ln in lines if ln and not ln.startswith("#")]
    trailer = [ln for ln in lines if ln.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    if header != ["node", "mass"]:
        raise DimensionError(f"unexpected header {header}")
    data = np.array([[float(a), float(b)] for a, b in reader])
    if grid is None:
        grid = CorridorGrid.from_nodes(data[:, 0])
    elif not np.array_equal(grid.nodes, data[:, 0]):
        raise DimensionError("file nodes do not match the supplied grid")
    fields = {}
    if trailer:
        for item in trailer[-1].lstrip("# ").split(","):
            key, _, value = item.partition("=")
            fields[key.strip()] = float(value)
    return DiscreteOccupation(
        grid,
        data[:, 1].copy(),
        np.array(fields.get("total_mass", data[:, 1].sum())),
        np.array(fields.get("first_moment", data[:, 0] @ data[:, 1])),
        np.array(fields.get("min", np.inf)),
        np.array(fields.get("max", -np.inf)),
    )
