"""Direction sampling on the unit hypersphere and projection onto slices."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .core import (
    STREAM_DIRECTIONS,
    BatchLike,
    DirectionSet,
    Strategy,
    UnsupportedDimensionError,
    as_array,
    mix,
    norm_ppf,
    seeded_rng,
)

SOBOL_BITS = 32
# Joe-Kuo direction numbers shipped in data/sobol_directions.npy
SOBOL_MAX_DIM = 1024
# low-discrepancy seeds select a block of the sequence: index = 1 + (seed % SOBOL_BLOCKS) * m
SOBOL_BLOCKS = 1 << 16


class SliceMode(str, enum.Enum):
    RESAMPLE = "resample-per-step"
    FIXED = "fixed"


@dataclass(frozen=True)
class SliceSchedule:
    mode: SliceMode = SliceMode.RESAMPLE
    base_seed: int = 0
    m: int = 1024
    strategy: Strategy = Strategy.PSEUDORANDOM

    def __post_init__(self):
        object.__setattr__(self, "mode", SliceMode(self.mode))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.m < 1:
            raise ValueError("m must be positive")

    def step_seed(self, step: int) -> int:
        if self.mode is SliceMode.FIXED:
            return self.base_seed
        return mix(self.base_seed, step)


@lru_cache(maxsize=1)
def _sobol_table() -> np.ndarray:
    with resources.files("sigreg_lab").joinpath("data/sobol_directions.npy").open("rb") as fh:
        table = np.load(fh)
    return table.astype(np.uint64)


def sobol_points(start: int, count: int, dim: int) -> np.ndarray:
    """Unscrambled Sobol points ``start .. start+count-1`` in (0, 1)^dim.

    Point i is the XOR of the direction numbers selected by the bits of the
    Gray code of i, so any index range is O(count * bits) to generate.
    """
    if dim > SOBOL_MAX_DIM:
        raise UnsupportedDimensionError(
            f"low-discrepancy directions support k <= {SOBOL_MAX_DIM}, got k={dim}"
        )
    if start < 0 or start + count > (1 << SOBOL_BITS):
        raise ValueError("Sobol index range exceeds 2**32 points")
    v = _sobol_table()[:dim]
    idx = np.arange(start, start + count, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    x = np.zeros((count, dim), dtype=np.uint64)
    for bit in range(SOBOL_BITS):
        on = ((gray >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        if on.any():
            x[on] ^= v[:, bit]
    # half-LSB offset keeps every coordinate strictly inside (0, 1) for the inverse CDF
    return (x.astype(np.float64) + 0.5) / float(1 << SOBOL_BITS)


def sample_directions(seed: int, k: int, m: int, strategy=Strategy.PSEUDORANDOM) -> DirectionSet:
    """Draw ``m`` unit directions in R^k as the columns of a K x M matrix.

    Pseudorandom directions are normalized i.i.d. Gaussian vectors drawn from
    ``seeded_rng(seed, STREAM_DIRECTIONS)``. Low-discrepancy directions take
    Sobol points (skipping the all-zero point), map them through the inverse
    normal CDF and normalize.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be positive")
    strategy = Strategy(strategy)
    if strategy is Strategy.PSEUDORANDOM:
        rng = seeded_rng(seed, STREAM_DIRECTIONS)
        A = rng.standard_normal((k, m))
        norms = np.linalg.norm(A, axis=0)
        for col in np.flatnonzero(norms < 1e-300):
            while norms[col] < 1e-300:
                A[:, col] = rng.standard_normal(k)
                norms[col] = np.linalg.norm(A[:, col])
    else:
        start = 1 + (seed % SOBOL_BLOCKS) * m
        A = norm_ppf(sobol_points(start, m, k)).T
        norms = np.linalg.norm(A, axis=0)
    return DirectionSet(A / norms, seed=seed, strategy=strategy)


def project(batch: BatchLike, dirs) -> np.ndarray:
    """N x M matrix of projections ``batch @ dirs``."""
    X = as_array(batch)
    A = dirs.dirs if isinstance(dirs, DirectionSet) else np.asarray(dirs, dtype=np.float64)
    if X.shape[1] != A.shape[0]:
        raise ValueError(f"batch has k={X.shape[1]} but directions have k={A.shape[0]}")
    return X @ A


def step_directions(schedule: SliceSchedule, step: int, k: int) -> DirectionSet:
    """Directions for training step ``step``; identical on every worker."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    return sample_directions(schedule.step_seed(step), k, schedule.m, schedule.strategy)
