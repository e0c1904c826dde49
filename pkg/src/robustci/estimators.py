"""Least squares, Huber regression and the score functions built on them.

The Huber loss here has its knot fixed at 1 and no scale estimate::

    rho(t) = t**2          if |t| <= 1
             2|t| - 1      otherwise
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "FitResult",
    "SingularDesignError",
    "ConvergenceWarning",
    "huber_loss",
    "huber_score",
    "tanh_score",
    "huber_objective",
    "huber_stationarity",
    "ols",
    "huber_regression",
]

MAX_ITER = 500
_REL_DECREASE_TOL = 1e-12
_STATIONARITY_TOL = 1e-10
# accepted when progress stalls at floating-point resolution
_STALL_STATIONARITY_TOL = 1e-8
_FINISH_AFTER = 25


class SingularDesignError(ValueError):
    """Raised when a design matrix is (numerically) rank deficient."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FitResult:
    """Outcome of a regression fit.

    ``objective`` is the summed loss at ``coefficients`` (squared error for
    :func:`ols`, Huber loss for :func:`huber_regression`).
    """

    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool


def huber_loss(t):
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    return np.where(a <= 1.0, t * t, 2.0 * a - 1.0)


def huber_score(t):
    """Derivative of :func:`huber_loss`: ``2t`` clipped to ``[-2, 2]``."""
    return 2.0 * np.clip(np.asarray(t, dtype=float), -1.0, 1.0)


def tanh_score(t):
    # np.tanh saturates to +-1 without forming exp(t)
    return np.tanh(np.asarray(t, dtype=float))


def huber_objective(y: np.ndarray, Z: np.ndarray, c: np.ndarray) -> float:
    """Summed Huber loss ``sum rho(y_i - Z_i c)``.

    The minimizer is the same as for the mean loss; the sum is what
    :attr:`FitResult.objective` reports.
    """
    return float(np.sum(huber_loss(y - Z @ c)))


def huber_stationarity(y: np.ndarray, Z: np.ndarray, c: np.ndarray) -> float:
    """Norm of ``(1/n) sum rho'(y_i - Z_i c) Z_i``, zero exactly at the minimizer."""
    r = y - Z @ c
    return float(np.linalg.norm(Z.T @ huber_score(r)) / len(y))


def _qr_checked(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(A, mode="reduced")
    scale = np.linalg.norm(A)
    if A.shape[1] and (scale == 0 or np.min(np.abs(np.diag(R))) < 1e-12 * scale):
        raise SingularDesignError("singular design")
    return Q, R


def ols(target, W) -> FitResult:
    """Least-squares regression of ``target`` on the columns of ``W`` via QR.

    Raises
    ------
    SingularDesignError
        If ``W`` has fewer rows than columns or is numerically rank deficient.
    """
    target = np.asarray(target, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    n, k = W.shape
    if n < k:
        raise SingularDesignError("singular design: fewer rows than columns")
    Q, R = _qr_checked(W)
    coef = solve_triangular(R, Q.T @ target)
    resid = target - W @ coef
    return FitResult(coef, float(resid @ resid), 0, True)


def _irls_step(y, Z, r):
    a = np.abs(r)
    # rho'(r) / (2 r), with limit 1 at r = 0
    w = np.where(a <= 1.0, 1.0, 1.0 / np.maximum(a, 1.0))
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
    return coef


def _active_set_step(y, Z, r):
    # exact minimizer of the quadratic piece selected by the current residuals
    inl = np.abs(r) <= 1.0
    if inl.sum() < Z.shape[1]:
        return None
    Zi = Z[inl]
    rhs = Zi.T @ y[inl] + Z[~inl].T @ np.sign(r[~inl])
    try:
        Q, R = _qr_checked(Zi)
    except SingularDesignError:
        return None
    return solve_triangular(R, solve_triangular(R.T, rhs, lower=True))


def _huber_delta(r: np.ndarray, d: np.ndarray) -> float:
    """``sum(rho(r - d) - rho(r))`` without cancellation against large ``|r|``."""
    s = r - d
    a, b = np.abs(r), np.abs(s)
    out = huber_loss(s) - huber_loss(r)
    quad = (a <= 1.0) & (b <= 1.0)
    out[quad] = (d * (d - 2.0 * r))[quad]
    lin = (a > 1.0) & (b > 1.0) & (np.sign(r) == np.sign(s))
    out[lin] = (-2.0 * np.sign(r) * d)[lin]
    return float(np.sum(out))


def _line_search(r: np.ndarray, a: np.ndarray) -> float:
    """Exact minimizer over ``t >= 0`` of ``sum rho(r - t a)`` (convex, piecewise quadratic)."""

    def slope(t):
        return -float(huber_score(r - t * a) @ a)

    if slope(0.0) >= 0:
        return 0.0
    hi = 1.0
    while slope(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            return 0.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if slope(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi if abs(slope(hi)) <= abs(slope(lo)) else lo


_IN, _OUT, _KNOT = 0, 1, 2


def _face_active_set(y, Z, c, tol, max_steps):
    """Exact active-set finisher for the piecewise-quadratic Huber objective.

    Residuals sitting on the knot ``|r| = 1`` are held there as equality
    constraints. Each step minimizes the quadratic model over the current
    face (or follows a descent ray when the model is flat on the face), stops
    at the first residual that reaches a knot, and otherwise releases the
    held residual with the largest multiplier toward the side that lowers
    the loss. Because the loss is C1, a face optimum with zero multipliers
    is an exact stationary point.
    """
    n, k = Z.shape
    r = y - Z @ c
    status = np.where(np.abs(r) <= 1.0, _IN, _OUT)
    sign = np.sign(r)
    sign[sign == 0] = 1.0
    for _ in range(max_steps):
        r = y - Z @ c
        inl = status == _IN
        knot = status == _KNOT
        psi = np.where(inl, 2.0 * r, 2.0 * sign)
        g = -(Z.T @ psi)  # gradient of the summed loss
        if np.linalg.norm(g) / n <= tol * (1.0 + np.linalg.norm(c)):
            return c
        Zk = Z[knot]
        if Zk.shape[0]:
            _, sk, Vk = np.linalg.svd(Zk, full_matrices=True)
            rk = int(np.sum(sk > 1e-12 * sk[0]))
            N = Vk[rk:].T
        else:
            N = np.eye(k)
        if N.shape[1] == 0:
            d = np.zeros(k)
            ray = False
        else:
            Zn = Z[inl] @ N
            gr = N.T @ g
            if Zn.shape[0]:
                _, sv, Vt = np.linalg.svd(Zn, full_matrices=True)
                rank = int(np.sum(sv > 1e-12 * max(sv[0], 1e-300))) if sv.size else 0
            else:
                sv, Vt, rank = np.zeros(0), np.eye(N.shape[1]), 0
            Vr, Vn = Vt[:rank].T, Vt[rank:].T
            flat = Vn @ (Vn.T @ gr)
            if np.linalg.norm(flat) > 1e-12 * max(np.linalg.norm(gr), 1e-300):
                d = -N @ flat
                ray = True
            else:
                d = -N @ (Vr @ ((Vr.T @ gr) / (2.0 * sv[:rank] ** 2)))
                ray = False
        a = Z @ d
        # ratio test: first free residual reaching a knot along c + t d
        t_block, j_block = (np.inf if ray else 1.0), -1
        with np.errstate(divide="ignore", invalid="ignore"):
            t_up = np.where(a < 0, (1.0 - r) / -a, np.inf)
            t_dn = np.where(a > 0, (r + 1.0) / a, np.inf)
            t_in = np.where(inl, np.minimum(t_up, t_dn), np.inf)
            t_out = np.where(
                (status == _OUT) & (sign * a > 0), (r - sign) / a, np.inf
            )
        t_all = np.maximum(np.minimum(t_in, t_out), 0.0)
        j = int(np.argmin(t_all))
        if t_all[j] < t_block:
            t_block, j_block = float(t_all[j]), j
        if not np.isfinite(t_block):
            return None
        if np.any(d):
            c = c + t_block * d
        if j_block >= 0:
            sign[j_block] = 1.0 if (r[j_block] - t_block * a[j_block]) > 0 else -1.0
            status[j_block] = _KNOT
            continue
        # face optimum: multipliers of the held residuals
        r = y - Z @ c
        psi = np.where(status == _IN, 2.0 * r, 2.0 * sign)
        g = -(Z.T @ psi)
        if np.linalg.norm(g) / n <= tol * (1.0 + np.linalg.norm(c)):
            return c
        kidx = np.flatnonzero(status == _KNOT)
        if kidx.size == 0:
            return None
        mu, *_ = np.linalg.lstsq(Z[kidx].T, -g, rcond=None)
        i = int(np.argmax(np.abs(mu)))
        # releasing i moves r_i by -sign(mu_i); inward means it joins the quadratic set
        status[kidx[i]] = _IN if sign[kidx[i]] * -np.sign(mu[i]) < 0 else _OUT
    return None


def huber_regression(y, Z, init=None, max_iter: int = MAX_ITER) -> FitResult:
    """Minimize the mean Huber loss of ``y - Z c`` over ``c``.

    Iteratively reweighted least squares started from ``init`` (default: the
    OLS fit). Each iteration also tries the exact minimizer of the quadratic
    piece picked out by the current residuals, and keeps whichever candidate
    lowers the objective more. If that has not converged after a few dozen
    iterations (typical when fewer than ``k`` residuals lie inside the knot),
    an exact active-set pass over the knot structure finishes the job.
    Objective changes are evaluated per observation so that descent is still
    detected when gross outliers make the loss itself huge.

    If the iteration budget runs out, the last iterate is returned with
    ``converged=False`` and a :class:`ConvergenceWarning` is issued.
    """
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, k = Z.shape
    if n < k:
        raise SingularDesignError("singular design: fewer rows than columns")
    _qr_checked(Z)
    if init is None:
        c = ols(y, Z).coefficients
    else:
        c = np.array(init, dtype=float)
        if c.shape != (k,):
            raise ValueError(f"init must have length {k}")

    def result(c, it, ok):
        return FitResult(c, huber_objective(y, Z, c), it, ok)

    for it in range(1, max_iter + 1):
        r = y - Z @ c
        stat = float(np.linalg.norm(Z.T @ huber_score(r)) / n)
        bound = 1.0 + float(np.linalg.norm(c))
        if stat <= _STATIONARITY_TOL * bound:
            return result(c, it - 1, True)
        if it == _FINISH_AFTER:
            exact = _face_active_set(y, Z, c, _STATIONARITY_TOL, 20 * n + 100)
            if exact is not None:
                return result(exact, it, True)

        best_c, best_delta = None, 0.0
        cand = _irls_step(y, Z, r)
        delta = _huber_delta(r, Z @ (cand - c))
        if delta < best_delta:
            best_c, best_delta = cand, delta
        target = _active_set_step(y, Z, r)
        if target is not None:
            d = target - c
            a = Z @ d
            for t in {1.0, _line_search(r, a)}:
                if t > 0:
                    delta = _huber_delta(r, t * a)
                    if delta < best_delta:
                        best_c, best_delta = c + t * d, delta

        if best_c is None:
            # no representable descent left
            ok = stat <= _STALL_STATIONARITY_TOL * bound
            if not ok and it < _FINISH_AFTER:
                exact = _face_active_set(y, Z, c, _STATIONARITY_TOL, 20 * n + 100)
                if exact is not None:
                    return result(exact, it, True)
            if not ok:
                warnings.warn(
                    f"Huber regression stalled with stationarity {stat:.3g}",
                    ConvergenceWarning,
                    stacklevel=2,
                )
            return result(c, it, ok)
        f = huber_objective(y, Z, c)
        c = best_c
        if -best_delta <= _REL_DECREASE_TOL * max(f, 1e-300):
            stat = huber_stationarity(y, Z, c)
            if stat <= _STALL_STATIONARITY_TOL * (1.0 + float(np.linalg.norm(c))):
                return result(c, it, True)

    warnings.warn(
        f"Huber regression did not converge in {max_iter} iterations",
        ConvergenceWarning,
        stacklevel=2,
    )
    return result(c, max_iter, False)
