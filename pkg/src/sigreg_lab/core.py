"""Shared data types, seeding rules and embedding file I/O."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import special

MASK64 = (1 << 64) - 1

# stream ids used with ``mix`` so that independent consumers never share a stream
STREAM_DIRECTIONS = 0x01
STREAM_DATA = 0x02
STREAM_CALIBRATION = 0x03
STREAM_EVAL = 0x04


class FormatError(ValueError):
    """Embedding file does not match its declared format."""


class ValidationError(ValueError):
    """Embedding data violates an invariant (e.g. contains NaN/Inf)."""


class UnsupportedDimensionError(ValueError):
    pass


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for the 64-bit state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, stream: int) -> int:
    """Derive a child seed from ``(seed, stream)``.

    ``mix(seed, stream) = splitmix64(splitmix64(seed) ^ stream)``, all arithmetic
    modulo 2**64. Negative seeds are reduced modulo 2**64 first.
    """
    return splitmix64(splitmix64(seed & MASK64) ^ (stream & MASK64))


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic generator for ``(seed, stream)``.

    The bit generator is Philox-4x64 (counter based) keyed with
    ``mix(seed, stream)``; its output stream is identical on every platform.
    """
    return np.random.Generator(np.random.Philox(key=mix(seed, stream)))


def norm_cdf(x):
    """Standard normal CDF."""
    return special.ndtr(x)


def norm_ppf(p):
    """Inverse standard normal CDF."""
    return special.ndtri(p)


def _check_finite(data: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = (int(v) for v in bad[0])
        raise ValidationError(f"non-finite entry at row {row}, col {col}: {data[row, col]!r}")


@dataclass(frozen=True)
class EmbeddingBatch:
    """An N x K matrix of sample embeddings (rows are samples)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        _check_finite(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]


BatchLike = Union[EmbeddingBatch, np.ndarray]


def as_array(batch: BatchLike) -> np.ndarray:
    if isinstance(batch, EmbeddingBatch):
        return batch.data
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected an N x K matrix, got shape {arr.shape}")
    return arr


class Strategy(str, enum.Enum):
    PSEUDORANDOM = "pseudorandom-gaussian"
    LOW_DISCREPANCY = "low-discrepancy"


@dataclass(frozen=True)
class DirectionSet:
    """K x M matrix of unit-norm directions, one per column."""

    dirs: np.ndarray
    seed: int = 0
    strategy: Strategy = Strategy.PSEUDORANDOM

    def __post_init__(self):
        arr = np.array(self.dirs, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError("dirs must be a K x M matrix")
        norms = np.linalg.norm(arr, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every direction must have unit Euclidean norm")
        arr.setflags(write=False)
        object.__setattr__(self, "dirs", arr)
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    @property
    def k(self) -> int:
        return self.dirs.shape[0]

    @property
    def m(self) -> int:
        return self.dirs.shape[1]


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform trapezoid grid for the Epps-Pulley integral.

    The window is ``exp(-window_coef * t**2)``; the default 0.5 makes it
    coincide with the N(0, 1) characteristic function.
    """

    t_max: float = 5.0
    t_count: int = 17
    window_coef: float = 0.5
    knots: np.ndarray = field(init=False, repr=False, compare=False)
    target_cf: np.ndarray = field(init=False, repr=False, compare=False)
    weight: np.ndarray = field(init=False, repr=False, compare=False)
    trapz: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.t_count < 3 or self.t_count % 2 == 0:
            raise ValueError("t_count must be odd and >= 3")
        if not self.window_coef > 0:
            raise ValueError("window_coef must be positive")
        knots = np.linspace(-self.t_max, self.t_max, self.t_count)
        # force exact symmetry; linspace can be off by one ulp
        half = self.t_count // 2
        knots[half] = 0.0
        knots[:half] = -knots[: half : -1]
        target = np.exp(-0.5 * knots**2)
        if self.window_coef == 0.5:
            weight = target.copy()
        else:
            weight = np.exp(-self.window_coef * knots**2)
        h = knots[1] - knots[0]
        trapz = np.full(self.t_count, h)
        trapz[0] = trapz[-1] = h / 2
        for name, arr in (("knots", knots), ("target_cf", target), ("weight", weight), ("trapz", trapz)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_range(cls, t_min: float, t_max: float, t_count: int, window_coef: float = 0.5) -> "QuadratureGrid":
        if t_min != -t_max:
            raise ValueError("quadrature grid must be symmetric about 0 (t_min == -t_max)")
        return cls(t_max=t_max, t_count=t_count, window_coef=window_coef)

    @property
    def t_min(self) -> float:
        return -self.t_max


DEFAULT_GRID = QuadratureGrid()


class Aggregation(str, enum.Enum):
    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True)
class StatReport:
    per_slice: np.ndarray
    aggregate: float
    aggregation: Aggregation
    gradient: Optional[np.ndarray] = None

    @classmethod
    def build(cls, per_slice, aggregation, gradient=None) -> "StatReport":
        per_slice = np.asarray(per_slice, dtype=np.float64)
        aggregation = Aggregation(aggregation)
        agg = per_slice.mean() if aggregation is Aggregation.MEAN else per_slice.max()
        return cls(per_slice, float(agg), aggregation, gradient)


# -- embedding files ---------------------------------------------------------

MAGIC = b"EMB1"


def _infer_format(path: Path) -> str:
    return "csv" if path.suffix.lower() in (".csv", ".txt") else "raw-binary"


def load_embeddings(path, format: Optional[str] = None) -> EmbeddingBatch:
    """Read an embedding batch from ``path``.

    ``format`` is ``"csv"`` or ``"raw-binary"``; when omitted it is inferred
    from the file suffix (``.csv``/``.txt`` means CSV).
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "csv":
        data = _read_csv(path)
    elif fmt in ("raw-binary", "bin", "raw"):
        data = _read_raw(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    _check_finite(data)
    return EmbeddingBatch(data)


def _parse_header(line: str):
    try:
        n_str, k_str = line.strip().split(",")
        n, k = int(n_str), int(k_str)
    except ValueError:
        raise FormatError(f"bad header {line.strip()!r}, expected 'N,K'") from None
    if n < 1 or k < 1:
        raise FormatError(f"header dimensions must be positive, got {n},{k}")
    return n, k


def _read_csv(path: Path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty file")
    n, k = _parse_header(lines[0])
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"header declares {n} rows, found {len(rows)}")
    data = np.empty((n, k))
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != k:
            raise FormatError(f"row {i} has {len(parts)} columns, expected {k}")
        try:
            data[i] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"row {i} has a non-numeric entry") from None
    return data


def _read_raw(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise FormatError("missing EMB1 magic")
    n, k = struct.unpack("<II", blob[4:12])
    if n < 1 or k < 1:
        raise FormatError(f"header dimensions must be positive, got {n},{k}")
    payload = blob[12:]
    if len(payload) != 8 * n * k:
        raise FormatError(f"payload has {len(payload)} bytes, expected {8 * n * k}")
    return np.frombuffer(payload, dtype="<f8").reshape(n, k).astype(np.float64)


def save_embeddings(batch: BatchLike, path, format: Optional[str] = None) -> None:
    """Write ``batch`` so that :func:`load_embeddings` reproduces it bit-exactly."""
    data = as_array(batch)
    path = Path(path)
    fmt = format or _infer_format(path)
    n, k = data.shape
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(f"{n},{k}\n")
            for row in data:
                # repr of a Python float round-trips exactly
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    elif fmt in ("raw-binary", "bin", "raw"):
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<II", n, k))
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")
