import numpy as np
import pytest
import pywt
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sfca.wavelets import denoise_finest, dwt, idwt, wavelet_compress


@given(arrays(float, st.integers(16, 120), elements=st.floats(-10, 10)),
       st.sampled_from(["haar", "db2", "sym3", "sym8"]))
def test_dwt_matches_pywavelets(x, name):
    a, d = dwt(x, name)
    ra, rd = pywt.dwt(x, name, mode="symmetric")
    assert np.allclose(a, ra) and np.allclose(d, rd)


@given(arrays(float, st.integers(16, 120), elements=st.floats(-10, 10)),
       st.sampled_from(["db2", "sym3", "sym8"]))
def test_perfect_reconstruction(x, name):
    a, d = dwt(x, name)
    assert np.allclose(idwt(a, d, name, length=x.size), x)


def test_compress_matches_multilevel_pywavelets():
    x = np.random.default_rng(2).normal(size=672)
    ref = pywt.wavedec(x, "sym3", mode="symmetric", level=7)[0]
    assert np.allclose(wavelet_compress(x, "sym3", 7), ref)


def test_infeasible_level_raises():
    with pytest.raises(ValueError):
        wavelet_compress(np.zeros(96), "sym3", 9)


def test_denoise_keeps_smooth_signal_away_from_edges():
    # the 16-tap filter only disturbs the outer 16 samples
    x = np.sin(np.linspace(0, 2 * np.pi, 128))
    assert np.allclose(denoise_finest(x)[16:-16], x[16:-16], atol=1e-10)


def test_denoise_of_alternating_noise_vanishes():
    x = np.tile([1.0, -1.0], 64)
    assert np.abs(denoise_finest(x)[16:-16]).max() < 1e-12


def test_cycle_spin_is_shift_invariant_in_the_interior():
    x = np.zeros(128)
    x[60] = 1
    y = np.roll(x, 1)
    a = denoise_finest(x)
    b = denoise_finest(y)
    assert np.allclose(np.roll(a, 1)[20:-20], b[20:-20], atol=1e-10)
