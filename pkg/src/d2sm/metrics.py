"""Pixel-space quality metrics. Accumulation is done in float64."""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 8
SSIM_STRIDE = 4


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    return a, b


def psnr(a, b, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``math.inf`` when the images are identical."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim(a, b, peak=1.0):
    """Mean SSIM over 8x8 windows (stride 4) and channels.

    Windows use population statistics; C1 = (0.01 peak)^2, C2 = (0.03 peak)^2.
    """
    a, b = _pair(a, b)
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    wa = sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW), axis=(0, 1))[::SSIM_STRIDE, ::SSIM_STRIDE]
    wb = sliding_window_view(b, (SSIM_WINDOW, SSIM_WINDOW), axis=(0, 1))[::SSIM_STRIDE, ::SSIM_STRIDE]
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
