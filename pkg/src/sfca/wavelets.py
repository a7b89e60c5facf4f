"""Discrete wavelet transform with half-point symmetric extension.

Filter banks come from PyWavelets; the transform itself is a direct
convolve-and-downsample so the coefficient-length recurrence is explicit:
``len' = floor((len + flen - 1) / 2)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pywt


@lru_cache(maxsize=None)
def filter_bank(wavelet: str):
    """Return ``(dec_lo, dec_hi, rec_lo, rec_hi)`` as float arrays."""
    w = pywt.Wavelet(wavelet)
    return tuple(np.asarray(f, dtype=float) for f in w.filter_bank)


def coefficient_length(n: int, flen: int) -> int:
    return (n + flen - 1) // 2


def approximation_lengths(n: int, wavelet: str, level: int) -> list[int]:
    """Lengths of the approximation band at levels 0..level."""
    flen = len(filter_bank(wavelet)[0])
    lengths = [n]
    for _ in range(level):
        lengths.append(coefficient_length(lengths[-1], flen))
    return lengths


def dwt(x, wavelet: str):
    """Single-level DWT. Returns ``(approximation, detail)``."""
    x = np.asarray(x, dtype=float)
    dec_lo, dec_hi, _, _ = filter_bank(wavelet)
    flen = dec_lo.size
    n_out = coefficient_length(x.size, flen)
    xp = np.pad(x, flen - 1, mode="symmetric")
    stop = flen + 2 * n_out
    a = np.convolve(xp, dec_lo)[flen:stop:2]
    d = np.convolve(xp, dec_hi)[flen:stop:2]
    return a, d


def idwt(a, d, wavelet: str, length: int | None = None) -> np.ndarray:
    """Single-level inverse DWT; ``d=None`` reconstructs from ``a`` alone."""
    a = np.asarray(a, dtype=float)
    _, _, rec_lo, rec_hi = filter_bank(wavelet)
    flen = rec_lo.size
    up = np.zeros(2 * a.size)
    up[::2] = a
    out = np.convolve(up, rec_lo)
    if d is not None:
        d = np.asarray(d, dtype=float)
        if d.size != a.size:
            raise ValueError("approximation and detail bands differ in length")
        upd = np.zeros(2 * d.size)
        upd[::2] = d
        out = out + np.convolve(upd, rec_hi)
    m = 2 * a.size - flen + 2
    out = out[flen - 2 : flen - 2 + m]
    if length is not None:
        out = out[:length]
    return out


def wavelet_compress(series, wavelet: str = "sym3", level: int = 7) -> np.ndarray:
    """Approximation coefficients after ``level`` decomposition steps.

    Raises ``ValueError`` when the signal is too short for the requested level,
    i.e. when some step would see fewer samples than half the filter support.
    """
    x = np.asarray(series, dtype=float).ravel()
    if level < 1:
        raise ValueError("level must be a positive integer")
    flen = len(filter_bank(wavelet)[0])
    lengths = approximation_lengths(x.size, wavelet, level)
    if min(lengths[:-1]) < flen // 2 or lengths[-1] >= lengths[-2]:
        raise ValueError(
            f"level {level} is infeasible for length {x.size} with {wavelet} "
            f"(approximation lengths {lengths})"
        )
    a = x
    for _ in range(level):
        a, _ = dwt(a, wavelet)
    return a


def _project_coarse(x, wavelet):
    a, _ = dwt(x, wavelet)
    return idwt(a, None, wavelet, length=x.size)


def denoise_finest(series, wavelet: str = "sym8", cycle_spin: bool = True) -> np.ndarray:
    """Zero the level-1 detail band and reconstruct.

    With ``cycle_spin`` the projection is averaged over both decimation
    phases (the second phase is obtained by prepending one mirrored sample),
    which makes the operation shift-invariant: an isolated edge keeps a
    symmetric profile wherever it falls.
    """
    x = np.asarray(series, dtype=float).ravel()
    even = _project_coarse(x, wavelet)
    if not cycle_spin:
        return even
    odd = _project_coarse(np.concatenate([x[:1], x]), wavelet)[1:]
    return 0.5 * (even + odd)


def soft_denoise_finest(series, wavelet: str = "sym8") -> np.ndarray:
    """Level-1 soft thresholding at the universal threshold."""
    x = np.asarray(series, dtype=float).ravel()
    a, d = dwt(x, wavelet)
    sigma = np.median(np.abs(d)) / 0.6745
    thr = sigma * np.sqrt(2 * np.log(max(x.size, 2)))
    d = np.sign(d) * np.maximum(np.abs(d) - thr, 0.0)
    return idwt(a, d, wavelet, length=x.size)
