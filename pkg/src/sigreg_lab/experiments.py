"""Synthetic studies: X-distribution unfolding, direction resampling,
ridge-probe bias/variance, quadrature convergence, the Sobolev bound
constant, moment insufficiency and timing."""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_GRID,
    STREAM_DATA,
    STREAM_EVAL,
    BatchLike,
    EmbeddingBatch,
    QuadratureGrid,
    as_array,
    mix,
    seeded_rng,
)
from .loss import sigreg
from .oracles import moment_counterexample, reference_quadrature
from .slicing import SliceMode, SliceSchedule, sample_directions, step_directions
from .univariate import TestKind, epps_pulley, extended_jarque_bera, slice_ecf_sums

CSV_VERSION_LINE = "# sigreg-lab v1"


def format_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV text with a leading version comment line."""
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(header, rows))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, enum.Enum):
        return v.value
    return v


def null_constant(grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """Expected N-scaled EP statistic under H0: trapz(w (1 - phi^2)), independent of N."""
    return float(np.sum(grid.trapz * grid.weight * (1.0 - grid.target_cf**2)))


def null_study(n_values: Sequence[int] = (16, 128, 1024), batches: int = 200, seed: int = 0,
               grid: QuadratureGrid = DEFAULT_GRID) -> List[dict]:
    """Mean EP statistic over ``batches`` standard-normal samples per N, with its SE."""
    if batches < 2:
        raise ValueError("need at least 2 batches for a standard error")
    target = null_constant(grid)
    rows = []
    for n in n_values:
        rng = seeded_rng(mix(seed, n), STREAM_DATA)
        vals = np.array([epps_pulley(rng.standard_normal(n), grid) for _ in range(batches)])
        rows.append({"n": n, "mean_stat": float(vals.mean()),
                     "se": float(vals.std(ddof=1) / math.sqrt(batches)), "null_constant": target})
    return rows


# -- X distribution and unfolding --------------------------------------------------


@dataclass(frozen=True)
class XDistributionSpec:
    n: int
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("the X distribution needs k >= 2")
        if self.n < 1:
            raise ValueError("n must be positive")


def generate_x_distribution(spec: XDistributionSpec) -> EmbeddingBatch:
    """Gaussian batch whose first two coordinates are (g, s*g), s a random sign.

    Both marginals are N(0, 1) and the covariance is the identity, yet every
    row lies on one of the two diagonals.
    """
    rng = seeded_rng(spec.seed, STREAM_DATA)
    Z = rng.standard_normal((spec.n, spec.k))
    sign = np.where(rng.random(spec.n) < 0.5, -1.0, 1.0)
    Z[:, 1] = sign * Z[:, 0]
    return EmbeddingBatch(Z)


class Optimizer(str, enum.Enum):
    GD = "gd"
    ADAM = "adam"


@dataclass(frozen=True)
class UnfoldConfig:
    steps: int = 2000
    lr: float = 1e-2
    m_slices: int = 16
    schedule: Optional[SliceSchedule] = None
    test: TestKind = TestKind.EPPS_PULLEY
    grid: QuadratureGrid = DEFAULT_GRID
    optimizer: Optimizer = Optimizer.ADAM

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")
        object.__setattr__(self, "test", TestKind(self.test))
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.schedule is None:
            object.__setattr__(self, "schedule", SliceSchedule(SliceMode.RESAMPLE, 0, self.m_slices))
        elif self.schedule.m != self.m_slices:
            raise ValueError("schedule.m must equal m_slices")


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, x, g):
        if self.m is None:
            self.m, self.v = np.zeros_like(x), np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return x - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def unfold(batch: BatchLike, cfg: UnfoldConfig):
    """Optimize the samples themselves to minimize SIGReg.

    Returns ``(final_batch, trace)`` where ``trace[i]`` is the SIGReg value
    on step ``i``'s directions before the update.
    """
    if not cfg.test.differentiable:
        raise ValueError(f"{cfg.test.value} is not differentiable; use epps-pulley or moment-match")
    X = np.array(as_array(batch), dtype=np.float64)
    if cfg.lr == 0 or cfg.steps == 0:
        return EmbeddingBatch(X), np.array([])
    opt = Adam(cfg.lr) if cfg.optimizer is Optimizer.ADAM else None
    trace = np.empty(cfg.steps)
    for step in range(cfg.steps):
        dirs = step_directions(cfg.schedule, step, X.shape[1])
        report = sigreg(X, dirs, cfg.test, cfg.grid)
        trace[step] = report.aggregate
        X = opt.step(X, report.gradient) if opt else X - cfg.lr * report.gradient
    return EmbeddingBatch(X), trace


def expected_directional_statistic(batch: BatchLike, n_eval: int = 512, seed: int = 0,
                                   test=TestKind.EPPS_PULLEY, grid: QuadratureGrid = DEFAULT_GRID):
    """Mean and standard error of the slice statistic over fresh random directions."""
    X = as_array(batch)
    dirs = sample_directions(mix(seed, STREAM_EVAL), X.shape[1], n_eval)
    stats = sigreg(X, dirs, test, grid).per_slice
    return float(stats.mean()), float(stats.std(ddof=1) / math.sqrt(n_eval))


def resampling_study(k: int = 64, m_values: Sequence[int] = (4, 16, 64), steps: int = 300,
                     seeds: Sequence[int] = (0,), n: int = 256, lr: float = 1e-2,
                     optimizer=Optimizer.ADAM, n_eval: int = 512,
                     grid: QuadratureGrid = DEFAULT_GRID) -> List[dict]:
    """Unfold X-data with resampled vs fixed directions and score on fresh ones.

    One row per (M, mode) with the seed-averaged expected directional EP
    statistic over ``n_eval`` evaluation directions.
    """
    rows = []
    for m in m_values:
        for mode in (SliceMode.RESAMPLE, SliceMode.FIXED):
            vals = []
            for seed in seeds:
                X0 = generate_x_distribution(XDistributionSpec(n, k, seed))
                sched = SliceSchedule(mode, mix(seed, 0x51), m)
                cfg = UnfoldConfig(steps, lr, m, sched, TestKind.EPPS_PULLEY, grid, optimizer)
                X, _ = unfold(X0, cfg)
                vals.append(expected_directional_statistic(X, n_eval, seed, grid=grid)[0])
            vals = np.array(vals)
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
            rows.append({"m": m, "mode": mode.value, "mean_stat": float(vals.mean()), "se": se,
                         "n_seeds": len(vals)})
    return rows


# -- ridge probe ---------------------------------------------------------------


def ridge_bias_variance(eigs, lambda_wd: float, beta_norm: float = 1.0) -> dict:
    """Ridge-probe bias norms and OLS variance traces, iso vs aniso covariance.

    The isotropic reference has every eigenvalue equal to mean(eigs); the
    anisotropic bias is for the true parameter on the smallest-eigenvalue
    direction. Variances use noise variance 1.
    """
    eigs = np.asarray(eigs, dtype=np.float64).ravel()
    if eigs.size == 0 or np.any(eigs <= 0):
        raise ValueError("eigenvalues must be positive")
    if lambda_wd < 0:
        raise ValueError("lambda_wd must be nonnegative")
    mean = float(eigs.mean())
    return {
        "bias_iso": lambda_wd / (mean + lambda_wd) * beta_norm,
        "bias_aniso": lambda_wd / (float(eigs.min()) + lambda_wd) * beta_norm,
        "trace_var_iso": eigs.size / mean,
        "trace_var_aniso": float(np.sum(1.0 / eigs)),
    }


# -- Sobolev bound ------------------------------------------------------------------


def log_sobolev_bound_constant(k: int, alpha: float) -> float:
    if k < 2:
        raise ValueError("k must be >= 2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    h = (k - 1) / 2.0
    return (2 * alpha * math.log(2.0) + h * math.log(math.pi) + math.lgamma(alpha + h)
            - math.log(k - 1) - math.lgamma(alpha) - math.lgamma(h))


def sobolev_bound_constant(k: int, alpha: float) -> float:
    """C(K, a) = 2^(2a) pi^((K-1)/2) G(a + (K-1)/2) / ((K-1) G(a) G((K-1)/2)).

    Evaluated in log space; raises OverflowError only if the final value
    does not fit in a float.
    """
    return math.exp(log_sobolev_bound_constant(k, alpha))


def bound_decay(m: int, k: int, alpha: float) -> float:
    """The M^(-2 a / (K - 1)) factor multiplying the constant."""
    return float(m) ** (-2.0 * alpha / (k - 1))


def sobolev_table(k_values: Sequence[int], alpha_values: Sequence[float],
                  m_values: Sequence[int]) -> List[dict]:
    """Bound curves C(K, a) * M^(-2a/(K-1)) over a grid of (K, a, M)."""
    rows = []
    for k in k_values:
        for a in alpha_values:
            c = sobolev_bound_constant(k, a)
            for m in m_values:
                d = bound_decay(m, k, a)
                rows.append({"k": k, "alpha": a, "m": m, "constant": c, "decay": d, "bound": c * d})
    return rows


# -- quadrature -------------------------------------------------------------------


def quadrature_convergence(s, counts: Sequence[int] = (5, 9, 17, 33, 65), t_max: float = 5.0,
                           fine_count: int = 20001) -> dict:
    """Trapezoid EP error vs knot count against the Simpson reference.

    Returns rows of (count, value, abs_error) and the least-squares slope of
    log(error) against log(count).
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    ref = reference_quadrature(s, -t_max, t_max, fine_count)
    rows = []
    for c in counts:
        val = epps_pulley(s, QuadratureGrid(t_max, c))
        rows.append({"t_count": c, "value": val, "abs_error": abs(val - ref)})
    err = np.array([r["abs_error"] for r in rows])
    # errors that reach the reference's own floating-point floor carry no slope information
    floor = max(1e-13 * abs(ref), 1e-300)
    err = np.maximum(err, floor)
    slope = float(np.polyfit(np.log(np.asarray(counts, dtype=float)), np.log(err), 1)[0])
    return {"reference": ref, "rows": rows, "slope": slope}


# -- moment insufficiency ------------------------------------------------------------


def ecf_two_sample(s1, s2, grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """n_eff * trapz(|ecf1 - ecf2|^2 w) with n_eff = n1 n2 / (n1 + n2)."""
    s1 = np.asarray(s1, dtype=np.float64).ravel()
    s2 = np.asarray(s2, dtype=np.float64).ravel()
    half = grid.t_count // 2
    e1 = slice_ecf_sums(s1[:, None], grid)[0] / s1.size
    e2 = slice_ecf_sums(s2[:, None], grid)[0] / s2.size
    coef = 2.0 * grid.trapz[half:] * grid.weight[half:]
    coef[0] /= 2.0
    n_eff = s1.size * s2.size / (s1.size + s2.size)
    return float(n_eff * np.sum(np.abs(e1 - e2) ** 2 * coef))


def moment_insufficiency(order: int = 4, n: int = 100_000, replicates: int = 20, seed: int = 0,
                         grid: QuadratureGrid = DEFAULT_GRID) -> dict:
    """Compare moment-based and ECF-based separation of a moment-matched pair.

    Both laws are standardized with their (shared) mean and variance. EJB is
    evaluated on the plug-in quantile samples of each law, with a noise band
    from i.i.d. replicates. The ECF separation is the two-sample ECF
    distance between the plug-in samples divided by its average under
    same-law i.i.d. resampling.
    """
    pair = moment_counterexample(order)
    mom = pair.moments("plus", 2)
    loc, scale = mom[1], math.sqrt(mom[2] - mom[1] ** 2)
    plus = (pair.quantile_sample("plus", n) - loc) / scale
    minus = (pair.quantile_sample("minus", n) - loc) / scale
    rng = seeded_rng(seed, STREAM_DATA)
    support = (pair.support - loc) / scale

    def draw(p):
        return rng.choice(support, size=n, p=p)

    ejb_rep = {"plus": [], "minus": []}
    null_two = []
    for _ in range(replicates):
        a, b = draw(pair.p_plus), draw(pair.p_minus)
        ejb_rep["plus"].append(extended_jarque_bera(a))
        ejb_rep["minus"].append(extended_jarque_bera(b))
        null_two.append(ecf_two_sample(a, draw(pair.p_plus), grid))
    ejb_plus, ejb_minus = extended_jarque_bera(plus), extended_jarque_bera(minus)
    ejb_noise = math.hypot(np.std(ejb_rep["plus"], ddof=1), np.std(ejb_rep["minus"], ddof=1))
    ep_sep = ecf_two_sample(plus, minus, grid)
    ep_null = float(np.mean(null_two))
    return {
        "pair": pair,
        "ejb_plus": ejb_plus,
        "ejb_minus": ejb_minus,
        "ejb_noise": ejb_noise,
        "ejb_within_noise": abs(ejb_plus - ejb_minus) <= ejb_noise,
        "ep_plus": epps_pulley(plus, grid),
        "ep_minus": epps_pulley(minus, grid),
        "ep_two_sample": ep_sep,
        "ep_two_sample_null": ep_null,
        "ep_ratio": ep_sep / ep_null,
    }


# -- timing ------------------------------------------------------------------------

DEFAULT_TIMING_CELLS = (
    (512, 512, 16), (512, 512, 64), (512, 512, 256), (2048, 512, 16), (8192, 512, 16),
    (8192, 8192, 16), (32768, 512, 16), (512, 2048, 16), (512, 8192, 16),
)


def timing_benchmark(cells: Sequence = DEFAULT_TIMING_CELLS, repetitions: int = 10, k: int = 64,
                     seed: int = 0) -> List[dict]:
    """Wall-time of one SIGReg forward + gradient pass per (n, m, t_count) cell.

    The statistic uses ``t_count`` knots rounded up to the next odd count.
    """
    if repetitions < 10:
        raise ValueError("need at least 10 repetitions per cell")
    rows = []
    for n, m, t_count in cells:
        grid = QuadratureGrid(5.0, t_count + 1 - t_count % 2)
        X = seeded_rng(seed, STREAM_DATA).standard_normal((n, k))
        dirs = sample_directions(seed, k, m)
        sigreg(X, dirs, TestKind.EPPS_PULLEY, grid)  # warm-up
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            sigreg(X, dirs, TestKind.EPPS_PULLEY, grid)
            times.append((time.perf_counter() - t0) * 1e3)
        rows.append({"n": n, "m": m, "t_count": t_count, "mean_ms": float(np.mean(times)),
                     "std_ms": float(np.std(times, ddof=1))})
    return rows
