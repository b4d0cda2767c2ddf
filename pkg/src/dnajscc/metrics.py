"""Image quality metrics on 8-bit images."""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

PSNR_CAP = 100.0
PEAK = 255.0


def _pair(x, x_hat) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return x, x_hat


def psnr(x, x_hat) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``PSNR_CAP``."""
    x, x_hat = _pair(x, x_hat)
    mse = np.mean((x - x_hat) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(PEAK**2 / mse)))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, x_hat, *, win_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over all valid window positions and channels."""
    x, x_hat = _pair(x, x_hat)
    if x.ndim == 2:
        x, x_hat = x[..., None], x_hat[..., None]
    if x.shape[0] < win_size or x.shape[1] < win_size:
        raise ValueError(f"image {x.shape[:2]} is smaller than the {win_size}x{win_size} window")
    w = gaussian_window(win_size, sigma)
    c1 = (k1 * PEAK) ** 2
    c2 = (k2 * PEAK) ** 2

    def filt(a):
        return convolve2d(a, w, mode="valid")

    scores = []
    for ch in range(x.shape[2]):
        a, b = x[..., ch], x_hat[..., ch]
        mu_a, mu_b = filt(a), filt(b)
        var_a = filt(a * a) - mu_a**2
        var_b = filt(b * b) - mu_b**2
        cov = filt(a * b) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def batch_metrics(X, X_hat) -> tuple[np.ndarray, np.ndarray]:
    """Per-image PSNR and SSIM arrays for two aligned image batches."""
    p = np.array([psnr(a, b) for a, b in zip(X, X_hat)])
    s = np.array([ssim(a, b) for a, b in zip(X, X_hat)])
    return p, s
