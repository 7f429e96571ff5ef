"""Seeded, splittable Brownian-increment generation.

Each path owns an independent stream derived from (root seed, path index), so
a path regenerates bit-identically no matter how many paths are requested, in
which order they are produced, or how work is chunked across workers.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index),))
    return np.random.default_rng(ss)


def brownian_increments(seed: int, first_path: int, n_paths: int,
                        steps: int, m: int, dt: float) -> np.ndarray:
    """Increments for paths [first_path, first_path + n_paths), shape (paths, steps, m).

    Per-step variance is dt.
    """
    sqdt = np.sqrt(dt)
    out = np.empty((n_paths, steps, m))
    for i in range(n_paths):
        rng = path_generator(seed, first_path + i)
        out[i] = rng.standard_normal((steps, m)) * sqdt
    return out


def worker_count(default: Optional[int] = None) -> int:
    """Worker cap from HEATBOUND_THREADS, else the hardware parallelism."""
    env = os.environ.get("HEATBOUND_THREADS")
    if env is not None:
        try:
            v = int(env)
        except ValueError as exc:
            raise ValueError(f"HEATBOUND_THREADS must be an integer, got {env!r}") from exc
        if v < 1:
            raise ValueError(f"HEATBOUND_THREADS must be >= 1, got {v}")
        return v
    if default is not None:
        return default
    return os.cpu_count() or 1
