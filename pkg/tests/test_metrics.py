import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2sm.metrics import psnr, ssim


def test_psnr_identical_is_inf(rng):
    a = rng.random((8, 8, 1))
    assert psnr(a, a) == math.inf


def test_psnr_closed_forms():
    a = np.zeros((10, 10, 1))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    b = a.copy()
    b.flat[:10] = math.sqrt(0.01)  # 10 of 100 pixels -> MSE 0.001
    assert psnr(a, b) == pytest.approx(30.0, abs=1e-9)


def test_psnr_dim_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4, 1)), np.zeros((4, 5, 1)))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(1.01, 5.0))
def test_psnr_decreases_with_mse(offset, factor):
    a = np.zeros((4, 4, 1))
    assert psnr(a, a + offset * factor) < psnr(a, a + offset)


def test_ssim_identity_and_symmetry(rng):
    a = rng.random((16, 16, 2))
    b = rng.random((16, 16, 2))
    assert ssim(a, a) == 1.0
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-9
    assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_constant_offset():
    a = np.full((16, 16, 1), 0.2)
    b = a + 0.5
    c1 = 0.01 ** 2
    # all variances and covariances are zero: only the luminance term remains
    expected = (2 * 0.2 * 0.7 + c1) / (0.2 ** 2 + 0.7 ** 2 + c1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-12)


def test_ssim_errors():
    with pytest.raises(ValueError):
        ssim(np.zeros((7, 16, 1)), np.zeros((7, 16, 1)))
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8, 1)), np.zeros((8, 9, 1)))
