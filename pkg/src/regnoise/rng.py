"""Seed handling and replicate-level parallelism.

Every random stream is derived from a ``(master_seed, stream_id)`` pair through
:class:`numpy.random.SeedSequence`, so results depend only on the seed and the
replicate index, never on scheduling.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {v!r}")
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RngSeed":
        """Derive an independent seed by folding ``keys`` into the stream id."""
        ss = np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_id), *map(int, keys))
        )
        return RngSeed(self.master_seed, int(ss.generate_state(2, np.uint64)[0]))


def name_hash(name: str) -> int:
    """Stable 32-bit hash of an experiment name (Python's ``hash`` is salted)."""
    return zlib.crc32(name.encode("utf-8"))


def experiment_seed(master_seed: int, name: str, replicate: int) -> RngSeed:
    return RngSeed(master_seed).child(name_hash(name), replicate)


def as_generator(seed: RngSeed | int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngSeed):
        return seed.generator()
    return RngSeed(0 if seed is None else int(seed)).generator()


def worker_count(default: int = 1) -> int:
    """Worker count from ``LAB_THREADS``; falls back to ``default``."""
    raw = os.environ.get("LAB_THREADS")
    if raw is None or raw.strip() == "":
        return default
    n = int(raw)
    if n < 1:
        raise ValueError(f"LAB_THREADS must be >= 1, got {raw}")
    return n


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Order-preserving map; output is identical for any worker count."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def tree_sum(values: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Pairwise reduction in a fixed order."""
    vals = [np.asarray(v, dtype=float) for v in values]
    if not vals:
        raise ValueError("empty reduction")
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]
