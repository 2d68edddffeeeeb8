"""Evaluation metrics: Y-channel PSNR/SSIM, reduced-space kernel error, and
the fixed 8-kernel isotropic test set per scale.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .degradation import SETTING1_SIDE, check_kernel, gaussian_isotropic
from .image import as_image, rgb_to_y
from .kernel_space import PcaBasis, project

__all__ = ["psnr_y", "ssim_y", "kernel_l1_reduced", "gaussian8", "GAUSSIAN8_RANGES"]

GAUSSIAN8_RANGES = {2: (0.80, 1.60), 3: (1.35, 2.40), 4: (1.8, 3.2)}


def _to_y(img: np.ndarray) -> np.ndarray:
    img = as_image(img)
    return rgb_to_y(img) if img.shape[0] == 3 else img


def psnr_y(a: np.ndarray, b: np.ndarray, border: int = 0) -> float:
    """PSNR in dB on the luma plane, optionally shaving a border first.

    Identical inputs give math.inf.
    """
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if border < 0:
        raise ValueError(f"border must be >= 0, got {border}")
    ya, yb = _to_y(a), _to_y(b)
    if border:
        if 2 * border >= min(ya.shape[1], ya.shape[2]):
            raise ValueError(f"border {border} leaves no pixels in {ya.shape}")
        ya = ya[:, border:-border, border:-border]
        yb = yb[:, border:-border, border:-border]
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a normalized 1-D window."""
    t = sliding_window_view(img, win.size, axis=0) @ win
    return sliding_window_view(t, win.size, axis=1) @ win


def ssim_y(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM on the luma plane.

    11x11 Gaussian window (sigma 1.5), C1=(0.01)^2 and C2=(0.03)^2 on the
    [0, 1] range, averaged over valid window positions.
    """
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ya, yb = _to_y(a)[0], _to_y(b)[0]
    if min(ya.shape) < 11:
        raise ValueError(f"image {ya.shape} too small for the 11x11 SSIM window")
    win = _gaussian_window()
    c1, c2 = 0.01**2, 0.03**2
    mu_a = _filter_valid(ya, win)
    mu_b = _filter_valid(yb, win)
    var_a = _filter_valid(ya * ya, win) - mu_a**2
    var_b = _filter_valid(yb * yb, win) - mu_b**2
    cov = _filter_valid(ya * yb, win) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def kernel_l1_reduced(est_coeffs: np.ndarray, gt: np.ndarray, basis: PcaBasis) -> float:
    """Mean absolute error between estimated and projected ground-truth coefficients."""
    est_coeffs = np.asarray(est_coeffs, dtype=np.float64)
    gt_coeffs = project(basis, gt)
    if est_coeffs.shape != gt_coeffs.shape:
        raise ValueError(f"coefficient shape {est_coeffs.shape} != {gt_coeffs.shape}")
    return float(np.mean(np.abs(est_coeffs - gt_coeffs)))


def gaussian8(scale: int) -> list[np.ndarray]:
    """The 8 evenly spaced isotropic test kernels (side 21) for a scale."""
    if scale not in GAUSSIAN8_RANGES:
        raise ValueError(f"scale must be one of {sorted(GAUSSIAN8_RANGES)}, got {scale}")
    lo, hi = GAUSSIAN8_RANGES[scale]
    widths = np.linspace(lo, hi, 8)
    return [check_kernel(gaussian_isotropic(SETTING1_SIDE, w)) for w in widths]
