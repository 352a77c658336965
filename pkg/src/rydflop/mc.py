"""Seeded random substreams, ordered parallel maps and the trace container.

Every Monte Carlo unit of work (a trial, a Doppler sample, a chunk of
recapture samples) gets its own generator derived from ``(seed, index)``.
Results are gathered in index order before any reduction, so the worker
count never changes a single bit of the output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceResult", "substream", "ordered_map", "resolve_threads", "chunk_bounds"]


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for work unit ``index`` of a run seeded by ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return 1
    return min(int(threads), os.cpu_count() or 1)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool, order preserved."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def chunk_bounds(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(n, i + size)) for i in range(0, n, size)]


@dataclass
class TraceResult:
    """Signal versus time with per-point Monte Carlo standard error.

    ``t`` is in seconds. ``meta`` carries run bookkeeping (truncation counts,
    resampled pairs, ...).
    """

    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n_trials: int
    meta: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (self.t.shape == self.value.shape == self.stderr.shape):
            raise ValueError("t, value and stderr must have the same shape")

    @property
    def t_us(self) -> np.ndarray:
        return self.t * 1e6

    @classmethod
    def from_samples(cls, t, samples: np.ndarray, meta: dict | None = None, keep=False):
        """Mean and standard error over axis 0 of a (n_samples, n_t) array."""
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        mean = samples.mean(axis=0)
        err = samples.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
        return cls(t, mean, err, n, dict(meta or {}), samples if keep else None)
