"""Comparison intervals: the classical OLS t-interval and a Huber residual bootstrap."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import t as student_t

from .estimators import _qr_checked, huber_regression
from .interval import SolverError
from .model import Dataset, Interval
from .univariate import empirical_quantile_minus, empirical_quantile_plus

__all__ = ["BootstrapSpec", "ols_t_interval", "residual_bootstrap_interval"]


def _check_index(dataset: Dataset, target_index: int) -> int:
    if not (1 <= target_index <= dataset.p):
        raise ValueError(f"target_index must lie in [1, {dataset.p}], got {target_index}")
    if dataset.n <= dataset.p:
        raise ValueError(f"need n > p, got n={dataset.n}, p={dataset.p}")
    return target_index - 1


def ols_t_interval(dataset: Dataset, target_index: int = 1, alpha: float = 0.05) -> Interval:
    """``b_j +- t_{n-p, 1-alpha/2} * se_j`` centered at the OLS estimate.

    ``se_j**2 = sigma2 * [(X'X)^-1]_jj`` with ``sigma2 = RSS / (n - p)``. The
    Student quantile comes from ``scipy.stats.t.ppf``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    j = _check_index(dataset, target_index)
    X, y = dataset.X, dataset.y
    n, p = X.shape
    Q, R = _qr_checked(X)
    coef = solve_triangular(R, Q.T @ y)
    resid = y - X @ coef
    sigma2 = float(resid @ resid) / (n - p)
    # (X'X)^-1 = R^-1 R^-T, so its jj entry is the squared norm of row j of R^-1
    Rinv = solve_triangular(R, np.eye(p))
    se = math.sqrt(sigma2 * float(Rinv[j] @ Rinv[j]))
    half = float(student_t.ppf(1.0 - alpha / 2.0, n - p)) * se
    return Interval(coef[j] - half, coef[j] + half, alpha, "ols-t")


@dataclass(frozen=True)
class BootstrapSpec:
    """Residual bootstrap settings.

    ``seed`` accepts anything :class:`numpy.random.SeedSequence` does; each
    replicate gets its own spawned child stream. ``flavor`` is ``"basic"``
    (reflected) or ``"percentile"``.
    """

    replicates: int = 200
    seed: object = None
    flavor: str = "basic"

    def __post_init__(self):
        if int(self.replicates) != self.replicates or self.replicates < 2:
            raise ValueError("bootstrap needs at least 2 replicates")
        if self.flavor not in ("basic", "percentile"):
            raise ValueError(f"unknown bootstrap flavor {self.flavor!r}")

    def seed_sequence(self) -> np.random.SeedSequence:
        if isinstance(self.seed, np.random.SeedSequence):
            return self.seed
        return np.random.SeedSequence(self.seed)


def _huber_fit(y, X, init=None):
    fit = huber_regression(y, X, init=init)
    if not fit.converged:
        raise SolverError("Huber regression did not converge")
    return fit.coefficients


def residual_bootstrap_interval(
    dataset: Dataset,
    target_index: int = 1,
    alpha: float = 0.05,
    spec: BootstrapSpec = BootstrapSpec(),
) -> Interval:
    """Freedman residual bootstrap around the Huber regression fit.

    Residuals of the full-design Huber fit are resampled with replacement,
    added back to the fitted values and refit (warm-started at the original
    estimate). The basic interval is ``[2 b_j - Q*(1 - alpha/2), 2 b_j - Q*(alpha/2)]``
    with ``Q*`` taken as the order statistics ``q_minus(alpha/2)`` and
    ``q_plus(1 - alpha/2)`` of the replicate estimates.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    j = _check_index(dataset, target_index)
    X, y = dataset.X, dataset.y
    n = dataset.n
    b_hat = _huber_fit(y, X)
    fitted = X @ b_hat
    resid = y - fitted

    draws = np.empty(spec.replicates)
    for r, child in enumerate(spec.seed_sequence().spawn(spec.replicates)):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n)
        draws[r] = _huber_fit(fitted + resid[idx], X, init=b_hat)[j]

    q_lo = empirical_quantile_minus(draws, alpha / 2.0)
    q_hi = empirical_quantile_plus(draws, 1.0 - alpha / 2.0)
    if spec.flavor == "percentile":
        return Interval(q_lo, q_hi, alpha, "rb-percentile")
    center = float(b_hat[j])
    return Interval(2.0 * center - q_hi, 2.0 * center - q_lo, alpha, "rb")
