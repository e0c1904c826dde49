"""One-dimensional intervals: symmetric location, sign-score and tanh-score regression.

Two preprocessing recipes reduce other problems to :func:`location_interval`:

* for ``y_i = beta x_i + z_i`` with ``x_i`` symmetric and independent of
  ``z_i``, the ratios ``y_i / x_i = beta + z_i / x_i`` follow a symmetric
  location model (see :func:`ratio_statistics`);
* for asymmetric designs, pairwise differences ``y_i - y_j`` against
  ``x_i - x_j`` restore symmetry before taking ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .interval import invert_monotone_score
from .model import Interval

__all__ = [
    "QuantilePair",
    "empirical_quantile_minus",
    "empirical_quantile_plus",
    "location_levels",
    "location_interval",
    "sign_score",
    "median_reg_interval",
    "smooth_univariate_interval",
    "ratio_statistics",
]


@dataclass(frozen=True)
class QuantilePair:
    minus_level: float
    plus_level: float

    def __post_init__(self):
        if not (0.0 <= self.minus_level <= self.plus_level <= 1.0):
            raise ValueError("need 0 <= minus_level <= plus_level <= 1")


def _near_int(v: float) -> float:
    # absorb representation error in n*s so exact products land on integers
    r = round(v)
    return float(r) if abs(v - r) <= 1e-9 * max(1.0, abs(v)) else v


def empirical_quantile_minus(sample, s: float) -> float:
    """``inf{t : #{y_i <= t} / n >= s}``, i.e. the ceil(n s)-th order statistic."""
    y = np.sort(np.asarray(sample, dtype=float))
    n = y.size
    if n < 1:
        raise ValueError("empty sample")
    if not (0.0 < s <= 1.0):
        raise ValueError(f"level must satisfy 0 < s <= 1, got {s}")
    k = int(math.ceil(_near_int(n * s)))
    return float(y[k - 1])


def empirical_quantile_plus(sample, s: float) -> float:
    """``sup{t : #{y_i < t} / n <= s}``, i.e. the (floor(n s) + 1)-th order statistic."""
    y = np.sort(np.asarray(sample, dtype=float))
    n = y.size
    if n < 1:
        raise ValueError("empty sample")
    if not (0.0 <= s < 1.0):
        raise ValueError(f"level must satisfy 0 <= s < 1, got {s}")
    k = int(math.floor(_near_int(n * s))) + 1
    return float(y[k - 1])


def location_levels(n: int, alpha: float) -> QuantilePair:
    """Quantile levels ``1/2 -+ sqrt(log(2/alpha) / (2n))``."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    d = math.sqrt(math.log(2.0 / alpha) / (2.0 * n))
    if d >= 0.5:
        raise ValueError(
            f"insufficient sample for level: n={n} too small at alpha={alpha}"
        )
    return QuantilePair(0.5 - d, 0.5 + d)


def _binomial_rank(n: int, alpha: float) -> int:
    # largest k with P(K <= k - 1) + P(K >= n - k + 1) <= alpha, K ~ Bin(n, 1/2)
    ks = np.arange(0, n // 2 + 2)
    tail = 2.0 * binom.cdf(ks - 1, n, 0.5)
    ok = ks[tail <= alpha]
    return int(ok.max()) if ok.size else 0


def location_interval(sample, alpha: float = 0.05, exact: bool = False) -> Interval:
    """Distribution-free interval for the center of a symmetric location model.

    ``[q_minus(1/2 - d), q_plus(1/2 + d)]`` with ``d = sqrt(log(2/alpha)/(2n))``.
    With ``exact=True`` the Hoeffding offset is replaced by the Binomial(n, 1/2)
    sign-test rank, giving ``[y_(k), y_(n-k+1)]`` for the largest admissible
    ``k``; if no ``k >= 1`` qualifies the interval is unbounded.
    """
    y = np.asarray(sample, dtype=float)
    n = y.size
    if n < 1:
        raise ValueError("empty sample")
    if exact:
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must lie strictly between 0 and 1")
        k = _binomial_rank(n, alpha)
        if k < 1:
            return Interval(-math.inf, math.inf, alpha, "quantile-loc-exact", True, True)
        ys = np.sort(y)
        return Interval(float(ys[k - 1]), float(ys[n - k]), alpha, "quantile-loc-exact")
    levels = location_levels(n, alpha)
    return Interval(
        empirical_quantile_minus(y, levels.minus_level),
        empirical_quantile_plus(y, levels.plus_level),
        alpha,
        "quantile-loc",
    )


def ratio_statistics(x, y) -> np.ndarray:
    """``y_i / x_i`` over observations with ``x_i != 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = x != 0
    return y[keep] / x[keep]


def sign_score(x, y, beta: float) -> float:
    """``(1/n) sum sign(x_i beta - y_i) x_i`` with ``sign(0) = 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.sign(x * beta - y) * x))


def median_reg_interval(x, y, alpha: float = 0.05) -> Interval:
    """Invert the median-regression sign score at level ``C / sqrt(n)``.

    ``C = sqrt((2/n) sum x_i**2 log(2/alpha))``. The score is a nondecreasing
    step function jumping at the ratios ``y_i / x_i``, so the endpoints are
    read off the sorted breakpoints exactly. They are the infimum and supremum
    of the level set, so the returned interval is its closure.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of equal length")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    n = x.size
    ss = float(x @ x)
    if not ss > 0:
        raise ValueError("degenerate covariate: all x_i are zero")
    level = math.sqrt(2.0 * ss * math.log(2.0 / alpha)) / n

    keep = x != 0
    r = y[keep] / x[keep]
    w = np.abs(x[keep])
    order = np.argsort(r, kind="stable")
    r, w = r[order], w[order]
    brk, start = np.unique(r, return_index=True)
    group_w = np.add.reduceat(w, start)
    total = float(w.sum())
    below = np.concatenate([[0.0], np.cumsum(group_w)])
    # score just left / right of each breakpoint
    left = (2.0 * below[:-1] - total) / n
    right = (2.0 * below[1:] - total) / n

    method = "median-reg"
    if -total / n >= -level:
        lower, lo_unb = -math.inf, True
    else:
        lower, lo_unb = float(brk[np.argmax(right >= -level)]), False
    if total / n <= level:
        upper, up_unb = math.inf, True
    else:
        idx = np.nonzero(left <= level)[0][-1]
        upper, up_unb = float(brk[idx]), False
    return Interval(lower, upper, alpha, method, lo_unb, up_unb)


def smooth_univariate_interval(x, y, alpha: float = 0.05) -> Interval:
    """Tanh-score interval without nuisance covariates.

    ``{beta : |sum tanh(x_i beta - y_i) x_i| / sqrt(sum x_i**2) <= sqrt(2 log(2/alpha))}``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    c = math.sqrt(2.0 * math.log(2.0 / alpha))
    return invert_monotone_score(x, y, c, alpha, "smooth-univariate")
