"""Decorrelate-then-invert confidence intervals for one regression coefficient.

Pipeline for coefficient ``j``:

1. regress the target column ``x`` on the nuisance columns ``W`` by least
   squares and keep the residuals ``x_tilde`` (sample-orthogonal to ``W``);
2. fit the Huber regression of ``y`` on ``[x_tilde | W]`` and subtract the
   nuisance part, ``y_tilde = y - W gamma_hat``;
3. collect every ``beta`` whose self-normalized tanh score

       S(beta) = sum tanh(x_tilde_i beta - y_tilde_i) x_tilde_i / sqrt(sum x_tilde_i**2)

   lies in ``[-c, c]``. ``S`` is nondecreasing, so the set is an interval and
   its endpoints are found by bisection.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from .estimators import huber_regression, ols, tanh_score
from .model import Dataset, Interval, SplitDataset, split

__all__ = [
    "ThresholdRule",
    "DecorrelatedPair",
    "CollinearTargetError",
    "SolverError",
    "decorrelate",
    "score_statistic",
    "score_bound",
    "invert_score",
    "invert_monotone_score",
    "confidence_interval",
]


class CollinearTargetError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class ThresholdRule(str, enum.Enum):
    NON_ASYMPTOTIC = "alg1"
    GAUSSIAN_APPROX = "alg1-ga"

    def threshold(self, alpha: float) -> float:
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self is ThresholdRule.NON_ASYMPTOTIC:
            return 1.5 * math.sqrt(math.log(2.0 / alpha))
        return float(norm.ppf(1.0 - alpha / 2.0))

    @property
    def method(self) -> str:
        return self.value


@dataclass(frozen=True)
class DecorrelatedPair:
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    alpha_hat: np.ndarray
    gamma_hat: np.ndarray


def decorrelate(data: SplitDataset) -> DecorrelatedPair:
    """Build the decorrelated pairs ``(x_tilde, y_tilde)``.

    The coefficient on ``x_tilde`` from the joint Huber fit is discarded;
    only the nuisance part ``gamma_hat`` is used.
    """
    x, W, y = data.x, data.W, data.y
    n, k = W.shape
    if n <= k + 1:
        raise ValueError(f"need n > p, got n={n}, p={k + 1}")
    alpha_hat = ols(x, W).coefficients
    x_tilde = x - W @ alpha_hat
    ss = float(x_tilde @ x_tilde)
    if ss <= 1e-24 * max(float(x @ x), 1e-300):
        raise CollinearTargetError("target covariate collinear with nuisance block")
    fit = huber_regression(y, np.column_stack([x_tilde, W]))
    if not fit.converged:
        raise SolverError("Huber regression did not converge")
    gamma_hat = fit.coefficients[1:]
    y_tilde = y - W @ gamma_hat
    return DecorrelatedPair(x_tilde, y_tilde, alpha_hat, gamma_hat)


def _as_xy(pair):
    if isinstance(pair, DecorrelatedPair):
        return pair.x_tilde, pair.y_tilde
    x, y = pair
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def score_statistic(pair, beta: float) -> float:
    """Self-normalized tanh score ``S(beta)``; accepts a pair or ``(x, y)``."""
    x, y = _as_xy(pair)
    return float(tanh_score(x * beta - y) @ x / math.sqrt(float(x @ x)))


def score_bound(pair) -> float:
    """``sum |x| / sqrt(sum x**2)``: the limit of ``|S|`` as ``beta -> +-inf``."""
    x, _ = _as_xy(pair)
    return float(np.sum(np.abs(x)) / math.sqrt(float(x @ x)))


def _bisect_boundary(pred: Callable[[float], bool], false_at: float, true_at: float) -> float:
    """Point within tolerance of where a monotone predicate switches on.

    Returns a point where ``pred`` holds.
    """
    lo, hi = false_at, true_at
    while True:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return hi
        if abs(hi - lo) <= 1e-9 * max(1.0, abs(mid)):
            return hi
        if pred(mid):
            hi = mid
        else:
            lo = mid


def _expand(pred: Callable[[float], bool], start: float, direction: float, scale: float) -> float:
    # doubling search for a point where pred fails; caller guarantees one exists
    step = scale
    point = start + direction * step
    while pred(point):
        step *= 2.0
        point = start + direction * step
        if not math.isfinite(point):
            raise SolverError("bracket expansion overflowed")
    return point


def _root(S: Callable[[float], float], start: float, scale: float) -> float:
    """A zero crossing of the nondecreasing ``S``, searched from ``start``."""
    s0 = S(start)
    if s0 == 0.0:
        return start
    if s0 > 0:
        lo = _expand(lambda b: S(b) > 0, start, -1.0, scale)
        return _bisect_boundary(lambda b: S(b) > 0, lo, start)
    hi = _expand(lambda b: S(b) < 0, start, 1.0, scale)
    return _bisect_boundary(lambda b: S(b) >= 0, start, hi)


def invert_monotone_score(x, y, threshold: float, alpha: float, method: str) -> Interval:
    """``{beta : -threshold <= S(beta) <= threshold}`` for the tanh score on ``(x, y)``.

    The left endpoint is the smallest ``beta`` with ``S(beta) >= -threshold``
    and the right endpoint the largest with ``S(beta) <= threshold``. A side is
    unbounded when ``sum|x| / sqrt(sum x**2) <= threshold``, since ``|S|``
    never exceeds that bound.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ss = float(x @ x)
    if not ss > 0:
        raise ValueError("degenerate covariate: sum of squares is zero")
    norm_ = math.sqrt(ss)

    def S(beta: float) -> float:
        return float(np.tanh(x * beta - y) @ x) / norm_

    bound = float(np.sum(np.abs(x))) / norm_
    unbounded = bound <= threshold
    if unbounded:
        return Interval(-math.inf, math.inf, alpha, method, True, True)

    start = float(x @ y) / ss
    # width of the region where tanh is unsaturated, in beta units
    scale = max(1.0 / np.max(np.abs(x)), 1e-12 * max(1.0, abs(start)))
    center = _root(S, start, scale)

    def left_ok(b):
        return S(b) >= -threshold

    def right_ok(b):
        return S(b) <= threshold

    lo_false = _expand(left_ok, center, -1.0, scale)
    lower = _bisect_boundary(left_ok, lo_false, center)
    hi_false = _expand(right_ok, center, 1.0, scale)
    upper = -_bisect_boundary(lambda b: right_ok(-b), -hi_false, -center)
    return Interval(lower, upper, alpha, method)


def invert_score(pair, alpha: float, rule: ThresholdRule = ThresholdRule.NON_ASYMPTOTIC) -> Interval:
    x, y = _as_xy(pair)
    rule = ThresholdRule(rule)
    return invert_monotone_score(x, y, rule.threshold(alpha), alpha, rule.method)


def confidence_interval(
    dataset: Dataset,
    target_index: int = 1,
    alpha: float = 0.05,
    rule: ThresholdRule = ThresholdRule.NON_ASYMPTOTIC,
) -> Interval:
    """Robust confidence interval for coefficient ``target_index`` (1-based).

    Parameters
    ----------
    dataset : Dataset
        Responses and design, with ``n > p >= 2``.
    target_index : int
        Coefficient of interest, counted from 1.
    alpha : float
        Miscoverage level.
    rule : ThresholdRule
        ``NON_ASYMPTOTIC`` uses ``1.5 * sqrt(log(2 / alpha))``;
        ``GAUSSIAN_APPROX`` uses the normal quantile ``Phi^-1(1 - alpha/2)``.

    Returns
    -------
    Interval
        Tagged ``"alg1"`` or ``"alg1-ga"``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    if dataset.n <= dataset.p:
        raise ValueError(f"need n > p, got n={dataset.n}, p={dataset.p}")
    pair = decorrelate(split(dataset, target_index))
    return invert_score(pair, alpha, rule)
