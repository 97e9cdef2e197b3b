"""In-process simulation of multi-worker Epps-Pulley SIGReg.

Each worker projects its own rows and computes a local mean ECF per
(slice, knot). The reduction is a rank-ordered, local_n-weighted average of
those means, so the statistic equals the single-node value for any split.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .core import DEFAULT_GRID, Aggregation, BatchLike, DirectionSet, EmbeddingBatch, QuadratureGrid, StatReport, as_array
from .slicing import SliceSchedule, project, step_directions
from .univariate import ep_from_ecf, slice_ecf_sums


@dataclass(frozen=True)
class WorkerShard:
    rows: EmbeddingBatch
    rank: int
    world_size: int

    def __post_init__(self):
        if not 0 <= self.rank < self.world_size:
            raise ValueError("rank must lie in [0, world_size)")

    @property
    def local_n(self) -> int:
        return self.rows.n


def shard_batch(batch: BatchLike, world_size: int) -> List[WorkerShard]:
    """Split rows into ``world_size`` contiguous shards whose sizes differ by at most one."""
    X = as_array(batch)
    n = X.shape[0]
    if world_size < 1:
        raise ValueError("world_size must be positive")
    if world_size > n:
        raise ValueError(f"world_size={world_size} exceeds batch size N={n}")
    base, extra = divmod(n, world_size)
    shards, start = [], 0
    for rank in range(world_size):
        size = base + (rank < extra)
        shards.append(WorkerShard(EmbeddingBatch(X[start:start + size]), rank, world_size))
        start += size
    return shards


@dataclass
class AllReduceAvg:
    """Weighted-average all-reduce over per-worker (M, T) complex payloads."""

    parts: dict = field(default_factory=dict)

    def contribute(self, rank: int, local_n: int, local_ecf: np.ndarray) -> None:
        self.parts[rank] = (local_n, local_ecf)

    @property
    def payload_size(self) -> int:
        """Complex values sent per worker (M * T); independent of N."""
        return max(p[1].size for p in self.parts.values())

    def result(self):
        total = sum(n for n, _ in self.parts.values())
        acc = None
        for rank in sorted(self.parts):
            local_n, ecf = self.parts[rank]
            term = (local_n / total) * ecf
            acc = term if acc is None else acc + term
        return total, acc


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SIGREG_THREADS", "1")))
    except ValueError:
        return 1


def _local_ecf(shard: WorkerShard, A: np.ndarray, grid: QuadratureGrid):
    P = project(shard.rows, A)
    return shard.rank, shard.local_n, slice_ecf_sums(P, grid) / shard.local_n


def distributed_ep_sigreg(shards: Sequence[WorkerShard], dirs, grid: QuadratureGrid = DEFAULT_GRID,
                          reducer: AllReduceAvg = None) -> StatReport:
    """Epps-Pulley SIGReg computed from per-shard ECFs and one all-reduce."""
    if not shards:
        raise ValueError("need at least one shard")
    ks = {s.rows.k for s in shards}
    if len(ks) != 1:
        raise ValueError(f"shards disagree on K: {sorted(ks)}")
    A = dirs.dirs if isinstance(dirs, DirectionSet) else np.asarray(dirs, dtype=np.float64)
    reducer = AllReduceAvg() if reducer is None else reducer
    workers = _threads()
    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _local_ecf(s, A, grid), shards))
    else:
        results = [_local_ecf(s, A, grid) for s in shards]
    for rank, local_n, ecf in results:
        reducer.contribute(rank, local_n, ecf)
    total, ecf = reducer.result()
    return StatReport.build(ep_from_ecf(ecf, total, grid), Aggregation.MEAN)


def synced_directions(step: int, world_size: int, schedule: SliceSchedule, k: int) -> List[DirectionSet]:
    """The direction set every rank draws at ``step``; all entries are identical."""
    return [step_directions(schedule, step, k) for _ in range(world_size)]
