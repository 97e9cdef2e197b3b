"""Slow, independent reference computations used to check the fast paths."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List

import numpy as np
from scipy.integrate import simpson

from .core import BatchLike, as_array


def hz_beta(n: int, d: int) -> float:
    """Henze-Zirkler smoothing parameter 2^(-1/2) ((2d + 1) n / 4)^(1/(d + 4))."""
    return 2.0**-0.5 * ((2 * d + 1) * n / 4.0) ** (1.0 / (d + 4))


def bhep_statistic(batch: BatchLike, beta: float = None, block: int = 1024) -> float:
    """Baringhaus-Henze-Epps-Pulley statistic against N(0, I); O(N^2 K).

    ``beta`` defaults to :func:`hz_beta`.
    """
    Y = as_array(batch)
    n, d = Y.shape
    if beta is None:
        beta = hz_beta(n, d)
    if not beta > 0:
        raise ValueError("beta must be positive")
    b2 = beta * beta
    sq = np.einsum("ij,ij->i", Y, Y)
    pair = 0.0
    for start in range(0, n, block):
        Yb = Y[start:start + block]
        d2 = sq[start:start + block, None] + sq[None, :] - 2.0 * Yb @ Y.T
        np.maximum(d2, 0.0, out=d2)
        pair += np.exp(-0.5 * b2 * d2).sum()
    single = np.exp(-b2 * sq / (2.0 * (1.0 + b2))).sum()
    return float(pair / n - 2.0 / (1.0 + b2) ** (d / 2) * single + n / (1.0 + 2.0 * b2) ** (d / 2))


def reference_quadrature(s, t_min: float = -5.0, t_max: float = 5.0, fine_count: int = 20001,
                         window_coef: float = 0.5, chunk: int = 512) -> float:
    """N-scaled Epps-Pulley integral by composite Simpson on ``fine_count`` knots.

    The ECF is evaluated directly as a mean of complex exponentials.
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    if fine_count < 170 or fine_count % 2 == 0:
        raise ValueError("fine_count must be odd and at least 170")
    t = np.linspace(t_min, t_max, fine_count)
    integrand = np.empty_like(t)
    for start in range(0, t.size, chunk):
        tc = t[start:start + chunk]
        ecf = np.exp(1j * np.outer(s, tc)).mean(axis=0)
        integrand[start:start + chunk] = np.abs(ecf - np.exp(-0.5 * tc**2)) ** 2 * np.exp(-window_coef * tc**2)
    return float(s.size * simpson(integrand, x=t))


def finite_diff_grad(f: Callable[[np.ndarray], float], s, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(s + h e_i) - f(s - h e_i)) / 2h, any array shape."""
    if not h > 0:
        raise ValueError("h must be positive")
    s = np.array(s, dtype=np.float64)
    grad = np.zeros_like(s)
    flat, gflat = s.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(s)
        flat[i] = orig - h
        fm = f(s)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


# -- moment counterexample ---------------------------------------------------


@dataclass(frozen=True)
class DiscretePair:
    """Two distinct laws on a shared support whose moments 0..order agree."""

    support: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    order: int
    epsilon: float

    def moments(self, which: str, upto: int = None) -> np.ndarray:
        p = self.p_plus if which == "plus" else self.p_minus
        r = np.arange((self.order if upto is None else upto) + 1)
        return (self.support[None, :] ** r[:, None] * p).sum(axis=1)

    @property
    def tv_distance(self) -> float:
        return 0.5 * float(np.abs(self.p_plus - self.p_minus).sum())

    def quantile_sample(self, which: str, n: int) -> np.ndarray:
        """Deterministic plug-in sample: the law's quantiles at (i - 1/2)/n."""
        p = self.p_plus if which == "plus" else self.p_minus
        u = (np.arange(n) + 0.5) / n
        idx = np.searchsorted(np.cumsum(p), u, side="right")
        return self.support[np.minimum(idx, self.support.size - 1)]


def _nullspace_vector(rows: List[List[Fraction]]) -> List[Fraction]:
    """One nonzero kernel vector of a rank-deficient rational matrix (column-pivoted RREF)."""
    A = [row[:] for row in rows]
    n_rows, n_cols = len(A), len(A[0])
    pivots, r = [], 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(n_rows):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    free = next(c for c in range(n_cols) if c not in pivots)
    v = [Fraction(0)] * n_cols
    v[free] = Fraction(1)
    for i, c in enumerate(pivots):
        v[c] = -A[i][free]
    return v


def moment_counterexample(order: int, epsilon: float = 0.1) -> DiscretePair:
    """Laws on {0, ..., order+1} matching moments 0..order but not equal.

    ``p_pm = uniform +/- epsilon * v`` with v the primitive integer vector
    spanning the kernel of the moment map. If ``epsilon`` would make a mass
    nonpositive it is shrunk to half the largest admissible value.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    size = order + 2
    support = list(range(size))
    rows = [[Fraction(x) ** r for x in support] for r in range(order + 1)]
    v = _nullspace_vector(rows)
    # scale to a primitive integer vector with a positive first entry
    lcm = math.lcm(*(x.denominator for x in v))
    ints = [int(x * lcm) for x in v]
    g = math.gcd(*ints)
    ints = [x // g for x in ints]
    if ints[0] < 0:
        ints = [-x for x in ints]
    uniform = Fraction(1, size)
    eps = Fraction(epsilon)
    limit = uniform / max(abs(x) for x in ints)
    if eps >= limit:
        eps = limit / 2
    p_plus = [uniform + eps * x for x in ints]
    p_minus = [uniform - eps * x for x in ints]
    return DiscretePair(
        support=np.array(support, dtype=np.float64),
        p_plus=np.array([float(p) for p in p_plus]),
        p_minus=np.array([float(p) for p in p_minus]),
        order=order,
        epsilon=float(eps),
    )
