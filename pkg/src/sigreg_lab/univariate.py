"""One-dimensional goodness-of-fit statistics against N(0, 1).

Every statistic is a pure function of a sample vector. The Epps-Pulley
statistic is evaluated on an explicit trapezoid grid and also comes with an
analytic per-sample gradient; the slice-batched variants (``ep_slices``)
work on an N x M matrix of projections and are what the sliced losses use.
"""

from __future__ import annotations

import enum

import numpy as np

from .core import DEFAULT_GRID, QuadratureGrid, norm_cdf

AD_EPS = 1e-15
ROW_BLOCK = 4096


class DegenerateSampleError(ValueError):
    """Sample has zero variance where the statistic needs a positive one."""


class TestKind(str, enum.Enum):
    EPPS_PULLEY = "epps-pulley"
    JARQUE_BERA = "jarque-bera"
    EXTENDED_JARQUE_BERA = "extended-jarque-bera"
    CRAMER_VON_MISES = "cramer-von-mises"
    ANDERSON_DARLING = "anderson-darling"
    WATSON = "watson"
    MOMENT_MATCH = "moment-match"

    @property
    def differentiable(self) -> bool:
        return self in (TestKind.EPPS_PULLEY, TestKind.MOMENT_MATCH)


TestKind.__test__ = False  # not a pytest test class


def _sample(s, min_n: int = 1) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size < min_n:
        raise ValueError(f"need at least {min_n} sample(s), got {s.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError("sample contains non-finite values")
    return s


# -- Epps-Pulley ---------------------------------------------------------------
#
# Knots are symmetric about 0 and ecf(-t) = conj(ecf(t)), so only t >= 0 is
# evaluated; the t = 0 term vanishes identically (ecf(0) = phi(0) = 1).


def _half_grid(grid: QuadratureGrid):
    half = grid.t_count // 2
    t = grid.knots[half:]
    # trapezoid weight * window, doubled for the mirrored negative knot
    coef = grid.trapz[half:] * grid.weight[half:] * 2.0
    coef[0] /= 2.0
    return t, coef, grid.target_cf[half:]


def _phase_blocks(P: np.ndarray, h: float, count: int):
    """Yield (rows, j, exp(i*j*h*P[rows])) for j = 1..count-1.

    Successive knots come from repeated multiplication by exp(i*h*x); the
    yielded array is reused in place between iterations.
    """
    n = P.shape[0]
    for start in range(0, n, ROW_BLOCK):
        block = P[start:start + ROW_BLOCK]
        step = np.exp(1j * h * block)
        z = step.copy()
        rows = slice(start, start + block.shape[0])
        for j in range(1, count):
            if j > 1:
                z *= step
            yield rows, j, z


def slice_ecf_sums(P: np.ndarray, grid: QuadratureGrid = DEFAULT_GRID) -> np.ndarray:
    """Column sums of exp(i t P) for each slice and each knot t >= 0.

    Returns a complex (M, T//2 + 1) array. Memory beyond the output is
    O(ROW_BLOCK * M).
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    t, _, _ = _half_grid(grid)
    h = float(t[1] - t[0])
    out = np.zeros((P.shape[1], t.size), dtype=np.complex128)
    out[:, 0] = P.shape[0]
    for _, j, z in _phase_blocks(P, h, t.size):
        out[:, j] += z.sum(axis=0)
    return out


def ep_from_ecf(ecf: np.ndarray, n: int, grid: QuadratureGrid = DEFAULT_GRID) -> np.ndarray:
    """N-scaled Epps-Pulley values from a (M, T//2 + 1) half-grid ECF."""
    _, coef, target = _half_grid(grid)
    diff = ecf - target
    return n * ((diff.real**2 + diff.imag**2) * coef).sum(axis=-1)


def ep_grad_from_ecf(P: np.ndarray, ecf: np.ndarray, grid: QuadratureGrid = DEFAULT_GRID) -> np.ndarray:
    """d EP_m / d P[n, m] for every sample and slice, given the slice ECFs."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    t, coef, target = _half_grid(grid)
    diff = ecf - target
    # 2 * trapz-weight * window * t, per knot; t = 0 contributes nothing
    a = diff.real * (coef * t) * 2.0
    b = diff.imag * (coef * t) * 2.0
    h = float(t[1] - t[0])
    grad = np.zeros_like(P)
    for rows, j, z in _phase_blocks(P, h, t.size):
        grad[rows] += b[:, j] * z.real - a[:, j] * z.imag
    return grad


def ep_slices(P: np.ndarray, grid: QuadratureGrid = DEFAULT_GRID, grad: bool = False):
    """Epps-Pulley statistic for every column of the N x M projection matrix."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    n = P.shape[0]
    ecf = slice_ecf_sums(P, grid) / n
    stats = ep_from_ecf(ecf, n, grid)
    if not grad:
        return stats
    return stats, ep_grad_from_ecf(P, ecf, grid)


def epps_pulley(s, grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """N * trapz(|ecf(t) - exp(-t^2/2)|^2 * w(t)) over the grid knots."""
    s = _sample(s)
    return float(ep_slices(s[:, None], grid)[0])


def epps_pulley_grad(s, grid: QuadratureGrid = DEFAULT_GRID):
    """Return ``(statistic, gradient)`` with the analytic per-sample gradient."""
    s = _sample(s)
    stat, g = ep_slices(s[:, None], grid, grad=True)
    return float(stat[0]), g[:, 0]


# -- moment-based ------------------------------------------------------------


def _moments(s: np.ndarray):
    mu = s.mean()
    d = s - mu
    var = np.mean(d**2)
    if not var > 0:
        raise DegenerateSampleError("sample variance is zero")
    skew = np.mean(d**3) / var**1.5
    kurt = np.mean(d**4) / var**2
    return mu, var, skew, kurt


def jarque_bera(s) -> float:
    s = _sample(s, 2)
    _, _, skew, kurt = _moments(s)
    return float(s.size / 6.0 * (skew**2 + ((kurt - 3.0) / 2.0) ** 2))


def extended_jarque_bera(s) -> float:
    """Jarque-Bera plus penalties on the first two moments (target mean 0, var 1)."""
    s = _sample(s, 2)
    n = s.size
    mu, var, skew, kurt = _moments(s)
    jb = n / 6.0 * (skew**2 + ((kurt - 3.0) / 2.0) ** 2)
    return float(n * mu**2 / var + (n - 1) * (var - 1.0) ** 2 / 2.0 + jb)


def moment_match(s) -> float:
    """mean(s)^2 + (std(s) - 1)^2 with the 1/N standard deviation."""
    s = _sample(s, 2)
    return float(s.mean() ** 2 + (s.std() - 1.0) ** 2)


def moment_match_slices(P: np.ndarray, grad: bool = False):
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    n = P.shape[0]
    mu = P.mean(axis=0)
    sd = P.std(axis=0)
    stats = mu**2 + (sd - 1.0) ** 2
    if not grad:
        return stats
    # d std / d x_n = (x_n - mu) / (n std); zero-variance slices get no scale push
    scale = np.divide(sd - 1.0, sd, out=np.zeros_like(sd), where=sd > 0)
    g = 2.0 * mu / n + 2.0 * scale * (P - mu) / n
    return stats, g


def moment_match_grad(s):
    s = _sample(s, 2)
    stat, g = moment_match_slices(s[:, None], grad=True)
    return float(stat[0]), g[:, 0]


# -- EDF-based ---------------------------------------------------------------


def _sorted_cdf(s: np.ndarray) -> np.ndarray:
    return norm_cdf(np.sort(s, kind="stable"))


def cramer_von_mises(s) -> float:
    s = _sample(s)
    n = s.size
    F = _sorted_cdf(s)
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum(((2 * i - 1) / (2.0 * n) - F) ** 2))


def anderson_darling(s) -> float:
    s = _sample(s)
    n = s.size
    F = np.clip(_sorted_cdf(s), AD_EPS, 1.0 - AD_EPS)
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(F) + np.log1p(-F[::-1]))) / n)


def watson(s) -> float:
    s = _sample(s)
    n = s.size
    fbar = float(np.mean(norm_cdf(s)))
    return cramer_von_mises(s) - n * (fbar - 0.5) ** 2


_DISPATCH = {
    TestKind.JARQUE_BERA: jarque_bera,
    TestKind.EXTENDED_JARQUE_BERA: extended_jarque_bera,
    TestKind.CRAMER_VON_MISES: cramer_von_mises,
    TestKind.ANDERSON_DARLING: anderson_darling,
    TestKind.WATSON: watson,
    TestKind.MOMENT_MATCH: moment_match,
}


def eval_test(kind, s, grid: QuadratureGrid = DEFAULT_GRID) -> float:
    """Evaluate statistic ``kind`` on ``s``; ``grid`` only matters for Epps-Pulley."""
    kind = TestKind(kind)
    if kind is TestKind.EPPS_PULLEY:
        return epps_pulley(s, grid)
    return _DISPATCH[kind](s)


def eval_slices(kind, P: np.ndarray, grid: QuadratureGrid = DEFAULT_GRID, grad: bool = False):
    """Evaluate ``kind`` on every column of ``P``.

    With ``grad=True`` also returns the N x M matrix of per-sample gradients;
    only differentiable kinds support it.
    """
    kind = TestKind(kind)
    if kind is TestKind.EPPS_PULLEY:
        return ep_slices(P, grid, grad=grad)
    if kind is TestKind.MOMENT_MATCH:
        return moment_match_slices(P, grad=grad)
    if grad:
        raise ValueError(f"{kind.value} has no gradient (not differentiable)")
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    fn = _DISPATCH[kind]
    return np.array([fn(P[:, m]) for m in range(P.shape[1])])
