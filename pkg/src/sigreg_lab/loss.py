"""Sliced statistics, calibrated max-test, prediction loss and the LeJEPA loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import (
    DEFAULT_GRID,
    STREAM_CALIBRATION,
    Aggregation,
    BatchLike,
    DirectionSet,
    QuadratureGrid,
    StatReport,
    Strategy,
    as_array,
    mix,
    seeded_rng,
)
from .slicing import SliceMode, SliceSchedule, project, sample_directions, step_directions
from .univariate import TestKind, eval_slices


def _dir_matrix(dirs) -> np.ndarray:
    return dirs.dirs if isinstance(dirs, DirectionSet) else np.asarray(dirs, dtype=np.float64)


def sigreg(batch: BatchLike, dirs, test=TestKind.EPPS_PULLEY, grid: QuadratureGrid = DEFAULT_GRID) -> StatReport:
    """Mean of the slice statistics over the direction set.

    For differentiable tests the report also carries the gradient of the
    mean with respect to every embedding, ``sum_m g[n, m] a_m / M``.
    """
    test = TestKind(test)
    A = _dir_matrix(dirs)
    P = project(batch, A)
    if test.differentiable:
        stats, g = eval_slices(test, P, grid, grad=True)
        gradient = g @ A.T / A.shape[1]
        return StatReport.build(stats, Aggregation.MEAN, gradient)
    return StatReport.build(eval_slices(test, P, grid), Aggregation.MEAN)


def global_statistic_max(batch: BatchLike, dirs, test=TestKind.EPPS_PULLEY,
                         grid: QuadratureGrid = DEFAULT_GRID) -> StatReport:
    """Max of the slice statistics: the global test statistic."""
    P = project(batch, _dir_matrix(dirs))
    return StatReport.build(eval_slices(test, P, grid), Aggregation.MAX)


def null_max_statistics(n: int, k: int, m: int, trials: int, test=TestKind.EPPS_PULLEY,
                        grid: QuadratureGrid = DEFAULT_GRID, seed: int = 0,
                        aggregation=Aggregation.MAX, strategy=Strategy.PSEUDORANDOM) -> np.ndarray:
    """Simulated aggregate statistics over ``trials`` isotropic-Gaussian batches.

    Trial i draws its data from ``seeded_rng(mix(seed, i), STREAM_CALIBRATION)``
    and its directions from ``sample_directions(mix(seed, i), k, m, strategy)``.
    The default aggregation is the max (the global test statistic).
    """
    aggregation = Aggregation(aggregation)
    out = np.empty(trials)
    for i in range(trials):
        trial_seed = mix(seed, i)
        X = seeded_rng(trial_seed, STREAM_CALIBRATION).standard_normal((n, k))
        stats = eval_slices(test, project(X, sample_directions(trial_seed, k, m, strategy)), grid)
        out[i] = stats.max() if aggregation is Aggregation.MAX else stats.mean()
    return out


def calibrate_threshold(n: int, k: int, m: int, alpha: float, trials: int = 1000,
                        test=TestKind.EPPS_PULLEY, grid: QuadratureGrid = DEFAULT_GRID,
                        seed: int = 0, aggregation=Aggregation.MAX,
                        strategy=Strategy.PSEUDORANDOM) -> float:
    """Empirical (1 - alpha) quantile of the null aggregate statistic.

    Reject H0 when the observed statistic exceeds the returned value.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if trials < 100:
        raise ValueError("calibration needs at least 100 trials")
    stats = null_max_statistics(n, k, m, trials, test, grid, seed, aggregation, strategy)
    return float(np.quantile(stats, 1.0 - alpha))


# -- LeJEPA --------------------------------------------------------------------


@dataclass
class ViewsBatch:
    """V views of the same N samples; the first ``v_global`` are global views."""

    views: List[np.ndarray]
    v_global: int = 1

    def __post_init__(self):
        self.views = [np.asarray(as_array(v), dtype=np.float64) for v in self.views]
        if not self.views:
            raise ValueError("need at least one view")
        shape = self.views[0].shape
        if any(v.shape != shape for v in self.views):
            raise ValueError("all views must share N and K")
        if not 1 <= self.v_global <= len(self.views):
            raise ValueError("v_global must lie in [1, V]")

    @property
    def n_views(self) -> int:
        return len(self.views)


@dataclass
class LeJepaConfig:
    lam: float = 0.05
    m_slices: int = 1024
    grid: QuadratureGrid = DEFAULT_GRID
    test: TestKind = TestKind.EPPS_PULLEY
    schedule: Optional[SliceSchedule] = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        self.test = TestKind(self.test)
        if not self.test.differentiable:
            raise ValueError(f"{self.test.value} is not differentiable")
        if self.schedule is None:
            self.schedule = SliceSchedule(SliceMode.RESAMPLE, 0, self.m_slices)
        elif self.schedule.m != self.m_slices:
            raise ValueError("schedule.m must equal m_slices")


def prediction_loss(views: ViewsBatch):
    """Mean squared distance of every view to the mean of the global views.

    The mean runs over samples, views and dimensions. Gradients flow through
    the centers as well as the views; returns ``(loss, [grad per view])``.
    """
    Z = np.stack(views.views)  # V, N, K
    V, n, k = Z.shape
    centers = Z[: views.v_global].mean(axis=0)
    diff = centers - Z
    loss = float(np.mean(diff**2))
    scale = 2.0 / (V * n * k)
    grads = -scale * diff
    grads[: views.v_global] += scale * diff.sum(axis=0) / views.v_global
    return loss, list(grads)


def lejepa_loss(views: ViewsBatch, cfg: LeJepaConfig, step: int = 0):
    """(1 - lam) * prediction + lam * mean over views of SIGReg.

    All views share the step's direction set. Returns ``(loss, [grad per view])``.
    """
    pred, pred_grads = prediction_loss(views)
    dirs = step_directions(cfg.schedule, step, views.views[0].shape[1])
    reports = [sigreg(v, dirs, cfg.test, cfg.grid) for v in views.views]
    V = views.n_views
    reg = float(np.mean([r.aggregate for r in reports]))
    loss = (1.0 - cfg.lam) * pred + cfg.lam * reg
    grads = [(1.0 - cfg.lam) * g + (cfg.lam / V) * r.gradient for g, r in zip(pred_grads, reports)]
    return loss, grads
