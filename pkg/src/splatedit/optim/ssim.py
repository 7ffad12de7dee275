"""Structural dissimilarity with an analytic gradient.

Reference SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
C2 = 0.03^2 at unit dynamic range, population statistics, averaged over
all fully-interior window positions and channels. The loss is
D-SSIM = (1 - SSIM) / 2.

The gradient distributes each window's contribution back to its pixels
through the adjoint of the windowed averaging, split into a constant
term and terms linear in the pixel values of either image.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from ..core.types import ContractError, ImageBuffer

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
C1 = 0.01**2
C2 = 0.03**2

_offsets = np.arange(WINDOW_SIZE) - (WINDOW_SIZE - 1) / 2.0
_kernel = np.exp(-(_offsets**2) / (2.0 * WINDOW_SIGMA**2))
_kernel /= _kernel.sum()
_PAD = WINDOW_SIZE // 2


def _window_mean(img: np.ndarray) -> np.ndarray:
    """Gaussian-weighted window means at fully-interior positions."""
    out = correlate1d(img, _kernel, axis=0, mode="constant")
    out = correlate1d(out, _kernel, axis=1, mode="constant")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def _window_scatter(maps: np.ndarray, height: int, width: int) -> np.ndarray:
    """Adjoint of :func:`_window_mean`: spread per-window coefficients
    back onto the full pixel grid."""
    embedded = np.zeros((height, width))
    embedded[_PAD:-_PAD, _PAD:-_PAD] = maps
    out = correlate1d(embedded, _kernel, axis=0, mode="constant")
    return correlate1d(out, _kernel, axis=1, mode="constant")


def dssim_loss(a: ImageBuffer, b: ImageBuffer) -> tuple[float, np.ndarray]:
    """(1 - SSIM(a, b)) / 2 and its exact gradient with respect to ``a``."""
    if not a.same_shape(b):
        raise ContractError("image dims differ")
    if a.height < WINDOW_SIZE or a.width < WINDOW_SIZE:
        raise ContractError(
            f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE} for SSIM"
        )
    if np.array_equal(a.data, b.data):
        # Exactly equal images sit at the SSIM maximum; shortcut so the
        # gradient is exactly zero rather than float residue.
        return 0.0, np.zeros_like(a.data)

    H, W, C = a.height, a.width, a.channels
    n_windows = (H - WINDOW_SIZE + 1) * (W - WINDOW_SIZE + 1) * C
    grad = np.empty_like(a.data)
    ssim_total = 0.0

    for c in range(C):
        x = a.data[:, :, c]
        y = b.data[:, :, c]
        mu_x = _window_mean(x)
        mu_y = _window_mean(y)
        var_x = _window_mean(x * x) - mu_x**2
        var_y = _window_mean(y * y) - mu_y**2
        cov = _window_mean(x * y) - mu_x * mu_y

        a1 = 2.0 * mu_x * mu_y + C1
        a2 = 2.0 * cov + C2
        b1 = mu_x**2 + mu_y**2 + C1
        b2 = var_x + var_y + C2
        denom = b1 * b2
        s = a1 * a2 / denom
        ssim_total += float(s.sum())

        # dS/dx_p = w * (const + coef_x * x_p + coef_y * y_p) per window.
        coef_const = (2.0 * mu_y * (a2 - a1)) / denom + 2.0 * s * mu_x * (1.0 / b2 - 1.0 / b1)
        coef_x = -2.0 * s / b2
        coef_y = 2.0 * a1 / denom
        grad[:, :, c] = (
            _window_scatter(coef_const, H, W)
            + x * _window_scatter(coef_x, H, W)
            + y * _window_scatter(coef_y, H, W)
        )

    mean_ssim = ssim_total / n_windows
    value = (1.0 - mean_ssim) / 2.0
    return value, grad * (-0.5 / n_windows)
