"""Penalized least-squares smoothing in the DCT-II basis (Garcia's method).

The smoother solves ``min ||W^(1/2)(y - z)||^2 + s ||D2 z||^2`` where ``D2`` is
the second-difference operator with reflective boundaries. For full weights
the solution is diagonal in the orthonormal DCT-II basis,
``z = IDCT(Gamma * DCT(y))`` with ``Gamma_i = 1 / (1 + s * lambda_i**2)`` and
``lambda_i = -2 + 2 cos((i-1) pi / n)``. Missing values and robust weights are
handled by the fixed-point iteration of Garcia (2010).
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct, idct

BISQUARE_C = 4.685
ROBUST_ITERATIONS = 3


def eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues of the reflective second-difference operator."""
    return -2.0 + 2.0 * np.cos(np.arange(n) * np.pi / n)


def shrinkage(n: int, penalty: float) -> np.ndarray:
    """Per-frequency shrinkage factors ``Gamma``."""
    return 1.0 / (1.0 + penalty * eigenvalues(n) ** 2)


def _fill_linear(y: np.ndarray, observed: np.ndarray) -> np.ndarray:
    idx = np.arange(y.size)
    return np.interp(idx, idx[observed], y[observed])


def _weighted_smooth(y, w, gamma, z0, tol, max_iter):
    # over-relaxed fixed point: z <- idct(gamma * dct(w * (y - z) + z))
    relax = 1.75
    z = z0
    for _ in range(max_iter):
        znew = idct(gamma * dct(w * (y - z) + z, norm="ortho"), norm="ortho")
        znew = relax * znew + (1.0 - relax) * z
        change = np.linalg.norm(znew - z) / max(np.linalg.norm(znew), 1e-300)
        z = znew
        if change < tol:
            break
    return z


def _bisquare_weights(r, observed, penalty, n):
    r_obs = r[observed]
    mad = np.median(np.abs(r_obs - np.median(r_obs)))
    if mad == 0:
        return np.ones_like(r)
    # leverage of the smoother, as in smoothn
    h = np.sqrt(1 + 16 * penalty)
    h = np.sqrt(1 + h) / np.sqrt(2) / h
    u = np.abs(r / (1.4826 * mad) / np.sqrt(1 - h))
    wr = (1 - (u / BISQUARE_C) ** 2) ** 2
    wr[u / BISQUARE_C >= 1] = 0.0
    return wr


def garcia_smooth(
    series,
    penalty: float,
    robust: bool = False,
    weights=None,
    tol: float = 1e-10,
    max_iter: int = 2000,
) -> np.ndarray:
    """Smooth a 1-D series, filling missing (NaN) entries.

    Parameters
    ----------
    series : array_like
        Values to smooth; NaN marks a missing value.
    penalty : float
        Smoothing parameter ``s >= 0``.
    robust : bool
        Apply bisquare reweighting of residuals (3 passes).
    weights : array_like, optional
        Non-negative observation weights. Missing entries get weight 0.
    tol, max_iter
        Convergence control of the weighted iteration.

    Returns
    -------
    numpy.ndarray
        Smoothed series, finite everywhere.
    """
    y = np.asarray(series, dtype=float).ravel()
    n = y.size
    if n < 3:
        raise ValueError(f"series must have length >= 3, got {n}")
    if penalty < 0:
        raise ValueError(f"penalty must be non-negative, got {penalty}")

    observed = np.isfinite(y)
    if not observed.any():
        raise ValueError("series has no observed values")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).copy()
    if w.shape != y.shape or np.any(w < 0):
        raise ValueError("weights must be non-negative and match the series")
    w[~observed] = 0.0
    if w.max() > 0:
        w = w / w.max()

    gamma = shrinkage(n, penalty)
    yfill = _fill_linear(y, observed)

    if not robust and np.all(w == 1.0):
        if penalty == 0:
            return y.copy()
        return idct(gamma * dct(yfill, norm="ortho"), norm="ortho")

    z = _weighted_smooth(yfill, w, gamma, yfill.copy(), tol, max_iter)
    if robust:
        wr = np.ones(n)
        for _ in range(ROBUST_ITERATIONS):
            wr = _bisquare_weights(yfill - z, observed, penalty, n)
            z = _weighted_smooth(yfill, w * wr, gamma, z, tol, max_iter)
    return z
