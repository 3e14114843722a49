"""PSNR and SSIM between 8-bit RGB images."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import convolve

from .renderer import Image

SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
SSIM_WIN = 11
SSIM_SIGMA = 1.5


def _as_float(img: Image) -> np.ndarray:
    return img.pixels.astype(np.float64)


def psnr(a: Image, b: Image) -> float:
    """10 log10(255^2 / MSE) over all channels; +inf for identical images."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("image dimensions differ")
    mse = float(np.mean((_as_float(a) - _as_float(b)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: Image, b: Image) -> float:
    """Mean SSIM over sliding Gaussian-weighted 11x11 windows (sigma 1.5),
    computed per channel and averaged."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("image dimensions differ")
    if a.width < SSIM_WIN or a.height < SSIM_WIN:
        raise ValueError(f"images must be at least {SSIM_WIN}x{SSIM_WIN}")
    win = _gaussian_window(SSIM_WIN, SSIM_SIGMA)
    half = SSIM_WIN // 2
    x = _as_float(a)
    y = _as_float(b)
    scores = []
    for c in range(3):
        xc, yc = x[:, :, c], y[:, :, c]
        mu_x = convolve(xc, win, mode="constant")
        mu_y = convolve(yc, win, mode="constant")
        mu_xx = convolve(xc * xc, win, mode="constant")
        mu_yy = convolve(yc * yc, win, mode="constant")
        mu_xy = convolve(xc * yc, win, mode="constant")
        var_x = mu_xx - mu_x * mu_x
        var_y = mu_yy - mu_y * mu_y
        cov = mu_xy - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        s = num / den
        scores.append(np.mean(s[half:-half, half:-half]))  # valid windows only
    return float(np.mean(scores))
