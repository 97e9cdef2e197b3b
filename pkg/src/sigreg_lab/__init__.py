"""Sliced isotropic-Gaussian goodness-of-fit statistics and the SIGReg / LeJEPA losses."""

from .core import (
    DEFAULT_GRID,
    Aggregation,
    DirectionSet,
    EmbeddingBatch,
    FormatError,
    QuadratureGrid,
    StatReport,
    Strategy,
    UnsupportedDimensionError,
    ValidationError,
    load_embeddings,
    mix,
    save_embeddings,
    seeded_rng,
)
from .distributed import AllReduceAvg, WorkerShard, distributed_ep_sigreg, shard_batch, synced_directions
from .loss import (
    LeJepaConfig,
    ViewsBatch,
    calibrate_threshold,
    global_statistic_max,
    lejepa_loss,
    prediction_loss,
    sigreg,
)
from .slicing import SliceMode, SliceSchedule, project, sample_directions, step_directions
from .univariate import DegenerateSampleError, TestKind, epps_pulley, epps_pulley_grad, eval_test

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID", "Aggregation", "AllReduceAvg", "DegenerateSampleError", "DirectionSet",
    "EmbeddingBatch", "FormatError", "LeJepaConfig", "QuadratureGrid", "SliceMode", "SliceSchedule",
    "StatReport", "Strategy", "TestKind", "UnsupportedDimensionError", "ValidationError", "ViewsBatch",
    "WorkerShard", "calibrate_threshold", "distributed_ep_sigreg", "epps_pulley", "epps_pulley_grad",
    "eval_test", "global_statistic_max", "lejepa_loss", "load_embeddings", "mix", "prediction_loss",
    "project", "sample_directions", "save_embeddings", "seeded_rng", "shard_batch", "sigreg",
    "step_directions", "synced_directions",
]
