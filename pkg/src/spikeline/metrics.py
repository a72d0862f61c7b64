"""Reference-based image quality metrics for pipeline validation.

PSNR over 8-bit images with an infinity sentinel for exact matches, and
single-scale SSIM computed on non-overlapping 8x8 tiles (population
statistics, constants C1 = (0.01*255)^2, C2 = (0.03*255)^2, trailing
partial tiles ignored).  The tiling is part of the contract: scores are
reproducible bit-for-bit and invariant under permuting whole 8-row or
8-column tile bands of both images together.
"""

from __future__ import annotations

import numpy as np

from .isi_etfi import EtfiImage
from .stream_io import GrayImage

SSIM_WINDOW = 8
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def _as_float(img) -> np.ndarray:
    pixels = img.pixels if isinstance(img, GrayImage) else np.asarray(img)
    return pixels.astype(np.float64)


def psnr(a, b) -> float:
    """10*log10(255^2 / MSE); +inf for identical images."""
    x, y = _as_float(a), _as_float(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mse = np.mean((x - y) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def _tiles(x: np.ndarray) -> np.ndarray:
    h8 = x.shape[0] // SSIM_WINDOW
    w8 = x.shape[1] // SSIM_WINDOW
    x = x[:h8 * SSIM_WINDOW, :w8 * SSIM_WINDOW]
    return x.reshape(h8, SSIM_WINDOW, w8, SSIM_WINDOW)


def ssim(a, b) -> float:
    """Mean structural similarity over non-overlapping 8x8 tiles."""
    x, y = _as_float(a), _as_float(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be >= {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")

    tx, ty = _tiles(x), _tiles(y)
    axes = (1, 3)
    mx = tx.mean(axis=axes)
    my = ty.mean(axis=axes)
    vx = tx.var(axis=axes)
    vy = ty.var(axis=axes)
    cov = (tx * ty).mean(axis=axes) - mx * my
    score = ((2 * mx * my + _C1) * (2 * cov + _C2)) / (
        (mx ** 2 + my ** 2 + _C1) * (vx + vy + _C2))
    return float(score.mean())


def overexposure_ratio(e: EtfiImage) -> float:
    """Fraction of pixels whose pre-clip enhanced intensity is >= 255."""
    return float(np.mean(e.raw >= 255.0))
