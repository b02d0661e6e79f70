"""Counter-based random streams keyed by ``(seed, path index)``.

Every path owns an independent Philox stream whose key packs the seed and the
path index, and whose draws are consumed in step order.  Results therefore do
not depend on how many paths are simulated alongside, nor on the number of
worker threads used to fill the arrays.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigurationError

_TRINOMIAL = np.array([-1, 0, 1], dtype=np.int8)
_TRINOMIAL_P = np.array([1.0, 4.0, 1.0]) / 6.0


_STREAM_SHIFT = 40
_default_workers = None


def set_default_workers(n: int | None) -> None:
    """Worker threads used when a call does not say; ``None`` means all cores.

    Results never depend on this setting.
    """
    global _default_workers
    if n is not None and n < 1:
        raise ConfigurationError("worker count must be positive")
    _default_workers = n


def path_generator(seed: int, path: int, stream: int = 0) -> np.random.Generator:
    """Generator for one path; independent across ``(seed, stream, path)``.

    ``stream`` separates draws that must not share randomness for the same
    path index (e.g. the two phases of a regression Monte Carlo).
    """
    if seed < 0 or path < 0 or stream < 0:
        raise ConfigurationError("seed, stream and path index must be nonnegative")
    if path >= 1 << _STREAM_SHIFT:
        raise ConfigurationError("path index too large")
    key = [int(seed) % 2**64, (int(stream) << _STREAM_SHIFT) | int(path)]
    return np.random.Generator(np.random.Philox(key=key))


def _fill(out, seed, stream, draw, workers):
    n_paths = out.shape[0]

    def work(lo, hi):
        for j in range(lo, hi):
            out[j] = draw(path_generator(seed, j, stream))

    workers = workers or _default_workers or os.cpu_count() or 1
    chunk = max(1, -(-n_paths // workers))
    if workers == 1 or n_paths <= chunk:
        work(0, n_paths)
        return out
    with ThreadPoolExecutor(workers) as pool:
        futures = [pool.submit(work, lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
        for f in futures:
            f.result()
    return out


def _antithetic_rows(n_paths, antithetic):
    if not antithetic:
        return n_paths
    if n_paths % 2:
        raise ConfigurationError(f"antithetic sampling needs an even number of paths, got {n_paths}")
    return n_paths // 2


def normal_increments(seed, n_paths, n_steps, *, antithetic=False, stream=0, workers=None):
    """Standard normals of shape ``(n_paths, n_steps)``.

    With ``antithetic`` the second half is the negation of the first half,
    i.e. row ``j + n_paths/2`` equals ``-row j``.
    """
    base = _antithetic_rows(n_paths, antithetic)
    z = _fill(np.empty((base, n_steps)), seed, stream, lambda g: g.standard_normal(n_steps), workers)
    return np.concatenate([z, -z]) if antithetic else z


def trinomial_increments(seed, n_paths, n_steps, *, antithetic=False, stream=0, workers=None):
    """Draws from ``{-1, 0, 1}`` with probabilities ``(1/6, 4/6, 1/6)`` as ``int8``."""
    base = _antithetic_rows(n_paths, antithetic)
    draw = lambda g: g.choice(_TRINOMIAL, size=n_steps, p=_TRINOMIAL_P)  # noqa: E731
    z = _fill(np.empty((base, n_steps), dtype=np.int8), seed, stream, draw, workers)
    return np.concatenate([z, -z]) if antithetic else z
