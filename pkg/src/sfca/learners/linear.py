"""Linear, penalized and margin-based learners.

Penalized families work on columns standardized with the (weighted) mean and
standard deviation; coefficients are mapped back to the raw scale on return.
Objectives use the mean-weight normalization ``(1/n) sum w_i loss_i`` with
weights rescaled to mean 1.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

CD_TOL = 1e-7
CD_MAX_SWEEPS = 10_000


class ConvergenceError(RuntimeError):
    def __init__(self, what: str, iterations: int):
        super().__init__(f"{what} did not converge after {iterations} iterations")
        self.iterations = iterations


class SingularSystemWarning(UserWarning):
    pass


def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive, finite and one per row")
    return w * (n / w.sum())


def standardize(X, weights=None):
    """Center and scale columns.

    Returns ``(Z, means, scales, constant)``; zero-variance columns are only
    centered (scale 1) and flagged in ``constant``.
    """
    X = np.asarray(X, dtype=float)
    w = _weights(weights, X.shape[0])
    means = (w @ X) / w.sum()
    var = (w @ (X - means) ** 2) / w.sum()
    scales = np.sqrt(var)
    constant = scales <= 1e-12 * np.maximum(1.0, np.abs(means))
    scales = np.where(constant, 1.0, scales)
    return (X - means) / scales, means, scales, constant


def destandardize(Z, means, scales):
    return Z * scales + means


def _raw_coefficients(beta_std, intercept_std, means, scales):
    coef = beta_std / scales
    return coef, intercept_std - means @ coef


def fit_ols(X, y, weights=None):
    """Weighted least squares with an intercept.

    Solves the normal equations; a rank-deficient or ill-conditioned system
    falls back to the minimum-norm pseudo-inverse solution with a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    A = np.hstack([np.ones((n, 1)), X])
    sw = np.sqrt(w)
    if p + 1 <= n:
        G = A.T @ (A * w[:, None])
        if np.linalg.cond(G) < 1e12:
            theta = np.linalg.solve(G, A.T @ (w * y))
            return theta[1:], float(theta[0])
    warnings.warn(
        f"singular least-squares system ({n} rows, {p + 1} unknowns); using pseudo-inverse",
        SingularSystemWarning, stacklevel=2,
    )
    # Minimum-norm slopes on weighted-centred data keep the intercept out of
    # the norm, so a constant target gives zero slopes exactly.
    xm = w @ X / w.sum()
    ym = float(w @ y / w.sum())
    beta = np.linalg.pinv((X - xm) * sw[:, None]) @ (sw * (y - ym))
    return beta, ym - float(xm @ beta)


def fit_ridge(X, y, lam, weights=None):
    """Ridge on standardized columns; the intercept is not penalized.

    Minimizes ``(1/2n) sum w (y - b - Z beta)^2 + (lam/2) |beta|^2``. With
    ``lam == 0`` this is ordinary least squares; a singular system is handed
    to :func:`fit_ols`.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    Z, means, scales, _ = standardize(X, w)
    ybar = w @ y / n
    yc = y - ybar
    sw = np.sqrt(w)
    Zw = Z * sw[:, None]
    if p <= n:
        G = Zw.T @ Zw + n * lam * np.eye(p)
        if np.linalg.cond(G) > 1e12:
            return fit_ols(X, y, w)
        beta = np.linalg.solve(G, Zw.T @ (sw * yc))
    else:
        K = Zw @ Zw.T + n * lam * np.eye(n)
        if np.linalg.cond(K) > 1e12:
            return fit_ols(X, y, w)
        beta = Zw.T @ np.linalg.solve(K, sw * yc)
    return _raw_coefficients(beta, ybar, means, scales)


@njit(cache=True)
def _weighted_lasso_cd(Z, target, v, beta, b0, lam, tol, max_sweeps, fit_intercept):
    """Coordinate descent for ``(1/2n) sum v (t - b0 - Z beta)^2 + lam |beta|_1``."""
    n, p = Z.shape
    r = target - b0 - Z @ beta
    vsum = v.sum()
    norms = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += v[i] * Z[i, j] * Z[i, j]
        norms[j] = acc / n
    for sweep in range(max_sweeps):
        max_change = 0.0
        if fit_intercept:
            acc = 0.0
            for i in range(n):
                acc += v[i] * r[i]
            db = acc / vsum
            if db != 0.0:
                b0 += db
                for i in range(n):
                    r[i] -= db
                if abs(db) > max_change:
                    max_change = abs(db)
        for j in range(p):
            if norms[j] == 0.0:
                continue
            old = beta[j]
            acc = 0.0
            for i in range(n):
                acc += v[i] * Z[i, j] * r[i]
            rho = acc / n + norms[j] * old
            if rho > lam:
                new = (rho - lam) / norms[j]
            elif rho < -lam:
                new = (rho + lam) / norms[j]
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                for i in range(n):
                    r[i] -= Z[i, j] * d
                beta[j] = new
                if abs(d) > max_change:
                    max_change = abs(d)
        if max_change < tol:
            return beta, b0, sweep + 1, True
    return beta, b0, max_sweeps, False


def lambda_max(X, y, weights=None) -> float:
    """Smallest lasso penalty at which every slope is zero."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    w = _weights(weights, n)
    Z, _, _, _ = standardize(X, w)
    yc = y - w @ y / n
    return float(np.max(np.abs(Z.T @ (w * yc))) / n)


def _polish_active_set(Z, target, v, beta, b0, lam, tol):
    """Exact lasso solution on the current support, if it is the optimum.

    Solves the stationarity equations restricted to the nonzero coordinates
    with their current signs. The result is accepted only when the signs are
    unchanged and every coordinate satisfies the KKT conditions within
    ``tol``; otherwise ``None`` is returned.
    """
    n = Z.shape[0]
    active = np.flatnonzero(beta)
    if active.size == 0 or active.size > n:
        return None
    sign = np.sign(beta[active])
    ZA = Z[:, active]
    G = ZA.T @ (ZA * v[:, None]) / n
    rhs = ZA.T @ (v * (target - b0)) / n - lam * sign
    try:
        bA = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.sign(bA) == sign):
        return None
    cand = np.zeros_like(beta)
    cand[active] = bA
    grad = Z.T @ (v * (target - b0 - Z @ cand)) / n
    inactive = np.ones(beta.size, dtype=bool)
    inactive[active] = False
    if np.any(np.abs(grad[inactive]) > lam + tol):
        return None
    if np.any(np.abs(grad[active] - lam * sign) > tol):
        return None
    return cand


def _lasso_solve(Z, target, v, beta, b0, lam, tol, max_sweeps, fit_intercept, chunk=250):
    """Coordinate descent with an active-set polish whenever sweeps stall.

    Near-collinear columns (common when there are many more columns than
    rows) make coordinate descent trade weight between columns in ever
    smaller steps. Every ``chunk`` sweeps the current support is tried as
    the exact solution.
    """
    Z = np.asfortranarray(Z)
    done = 0
    while done < max_sweeps:
        step = min(chunk, max_sweeps - done)
        beta, b0, sweeps, ok = _weighted_lasso_cd(Z, target, v, beta, b0, lam, tol, step, fit_intercept)
        done += sweeps
        if ok:
            return beta, b0, done, True
        if not fit_intercept:
            polished = _polish_active_set(Z, target, v, beta, b0, lam, tol)
            if polished is not None:
                return polished, b0, done, True
    return beta, b0, done, False


def fit_lasso(X, y, lam, weights=None, tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS):
    """Lasso by cyclic coordinate descent on standardized columns.

    Returns raw-scale ``(coef, intercept, info)``; ``info`` carries the
    standardized solution and the sweep count.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    Z, means, scales, _ = standardize(X, w)
    ybar = w @ y / n
    beta, b0, sweeps, ok = _lasso_solve(Z, y, w, np.zeros(p), ybar, float(lam), tol, max_sweeps, False)
    if not ok:
        raise ConvergenceError("lasso coordinate descent", sweeps)
    coef, intercept = _raw_coefficients(beta, b0, means, scales)
    return coef, intercept, {"beta_std": beta, "sweeps": sweeps}


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_loss(y, eta, w):
    # log(1 + exp(eta)) - y*eta, computed stably
    return float(np.mean(w * (np.logaddexp(0.0, eta) - y * eta)))


def fit_logistic_ridge(X, y, lam, weights=None, tol=1e-8, max_iter=100):
    """Ridge-penalized logistic regression by damped Newton steps."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    Z, means, scales, _ = standardize(X, w)
    A = np.hstack([np.ones((n, 1)), Z])
    theta = np.zeros(p + 1)
    pen = np.full(p + 1, lam)
    pen[0] = 0.0

    def objective(th):
        return _logistic_loss(y, A @ th, w) + 0.5 * lam * th[1:] @ th[1:]

    obj = objective(theta)
    for it in range(max_iter):
        mu = sigmoid(A @ theta)
        grad = A.T @ (w * (mu - y)) / n + pen * theta
        H = A.T @ (A * (w * mu * (1 - mu))[:, None]) / n + np.diag(pen) + 1e-10 * np.eye(p + 1)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            cobj = objective(cand)
            if cobj <= obj + 1e-12 or t < 1e-10:
                break
            t *= 0.5
        change = np.max(np.abs(cand - theta))
        theta, obj = cand, cobj
        if change < tol:
            return _raw_coefficients(theta[1:], theta[0], means, scales)
    raise ConvergenceError("logistic ridge Newton iteration", max_iter)


def fit_logistic_lasso(X, y, lam, weights=None, tol=CD_TOL, max_outer=100, max_sweeps=CD_MAX_SWEEPS):
    """L1-penalized logistic regression: IRLS outer loop, coordinate descent inside."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    Z, means, scales, _ = standardize(X, w)
    Zf = np.asfortranarray(Z)
    beta = np.zeros(p)
    ybar = np.clip(w @ y / n, 1e-6, 1 - 1e-6)
    b0 = float(np.log(ybar / (1 - ybar)))

    def objective(b, bb):
        return _logistic_loss(y, bb + Z @ b, w) + lam * np.abs(b).sum()

    obj = objective(beta, b0)
    for it in range(max_outer):
        eta = b0 + Z @ beta
        mu = sigmoid(eta)
        v = np.maximum(w * mu * (1 - mu), 1e-10)
        target = eta + w * (y - mu) / v
        nb, nb0, _, ok = _weighted_lasso_cd(
            Zf, target, v, beta.copy(), b0, float(lam), tol, max_sweeps, True
        )
        if not ok:
            raise ConvergenceError("logistic lasso inner coordinate descent", max_sweeps)
        # backtrack along the proximal Newton direction
        t = 1.0
        while True:
            cb = beta + t * (nb - beta)
            cb0 = b0 + t * (nb0 - b0)
            cobj = objective(cb, cb0)
            if cobj <= obj + 1e-12 or t < 1e-10:
                break
            t *= 0.5
        change = max(np.max(np.abs(cb - beta)) if p else 0.0, abs(cb0 - b0))
        beta, b0, obj = cb, cb0, cobj
        if change < tol:
            coef, intercept = _raw_coefficients(beta, b0, means, scales)
            return coef, intercept
    raise ConvergenceError("logistic lasso outer iteration", max_outer)


def fit_linear_svm(X, y, lam, weights=None, n_iter=500):
    """Linear SVM by full-batch hinge-loss subgradient descent.

    Minimizes ``(lam/2)|beta|^2 + (1/n) sum w max(0, 1 - y_pm f(x))`` with
    step ``1/(lam t)`` and iterate averaging over the second half of the run;
    the intercept is unpenalized. A one-dimensional logistic fit of the
    labels on the training margins (Platt scaling) turns margins into scores.

    Returns ``(coef, intercept, platt_slope, platt_offset)``.
    """
    if lam <= 0:
        raise ValueError("svm lambda must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _weights(weights, n)
    Z, means, scales, _ = standardize(X, w)
    ypm = np.where(y > 0.5, 1.0, -1.0)
    beta = np.zeros(p)
    b0 = 0.0
    avg_beta = np.zeros(p)
    avg_b0 = 0.0
    n_avg = 0
    radius = 1.0 / np.sqrt(lam)
    for t in range(1, n_iter + 1):
        margin = ypm * (Z @ beta + b0)
        active = margin < 1.0
        g_beta = lam * beta - Z[active].T @ (w[active] * ypm[active]) / n
        g_b0 = -np.sum(w[active] * ypm[active]) / n
        eta = 1.0 / (lam * t)
        beta = beta - eta * g_beta
        b0 = b0 - eta * g_b0
        norm = np.linalg.norm(beta)
        if norm > radius:
            beta *= radius / norm
        if t > n_iter // 2:
            avg_beta += beta
            avg_b0 += b0
            n_avg += 1
    beta = avg_beta / n_avg
    b0 = avg_b0 / n_avg
    coef, intercept = _raw_coefficients(beta, b0, means, scales)
    margins = X @ coef + intercept
    a, c = fit_logistic_ridge(margins[:, None], y, 1e-6, w)
    return coef, intercept, float(a[0]), float(c)
