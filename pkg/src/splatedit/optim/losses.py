"""Image losses for RoI lifting and editing, each returning (value, grad).

Every loss is normalized per pixel (and channel) so learning rates do not
depend on render resolution, and every returned gradient is the exact
derivative of the returned value with respect to the first argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import ContractError, ImageBuffer
from .ssim import dssim_loss


def _check_dims(a: ImageBuffer, b: ImageBuffer) -> None:
    if not a.same_shape(b):
        raise ContractError(
            f"image dims differ: {(a.height, a.width, a.channels)} vs "
            f"{(b.height, b.width, b.channels)}"
        )


def l1_loss(a: ImageBuffer, b: ImageBuffer) -> tuple[float, np.ndarray]:
    """Mean absolute difference; subgradient 0 where a equals b exactly."""
    _check_dims(a, b)
    diff = a.data - b.data
    value = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return value, grad


def edit_loss(rendered: ImageBuffer, edited_target: ImageBuffer,
              beta: float) -> tuple[float, np.ndarray]:
    """Convex blend (1 - beta) * L1 + beta * D-SSIM against the edited image."""
    if not (0.0 <= beta <= 1.0):
        raise ContractError(f"beta must lie in [0, 1], got {beta}")
    _check_dims(rendered, edited_target)
    v1, g1 = l1_loss(rendered, edited_target)
    if beta == 0.0:
        return v1, g1
    v2, g2 = dssim_loss(rendered, edited_target)
    return (1.0 - beta) * v1 + beta * v2, (1.0 - beta) * g1 + beta * g2


@dataclass
class LiftConfig:
    """Hyperparameters of the RoI lifting optimization.

    lambda1 rewards rendered RoI inside the target mask, lambda2
    penalizes it outside; threshold binarizes the trained attribute.
    """

    lambda1: float = 1.0
    lambda2: float = 1.0
    iterations: int = 300
    lr: float = 0.1
    threshold: float = 0.5

    def __post_init__(self):
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ContractError("lift loss weights must be non-negative")
        if not (0.0 < self.threshold < 1.0):
            raise ContractError("threshold must lie strictly inside (0, 1)")
        if self.iterations < 1:
            raise ContractError("iterations must be at least 1")


def lift_loss(rendered_roi: ImageBuffer, target_mask: ImageBuffer,
              cfg: LiftConfig) -> tuple[float, np.ndarray]:
    """Signed overlap loss: -lambda1 * mean(R * M) + lambda2 * mean(R * (1 - M)).

    Linear in the rendered RoI, minimized by covering the mask and
    nothing else; gradient is (-lambda1 * M + lambda2 * (1 - M)) / npix.
    """
    _check_dims(rendered_roi, target_mask)
    R = rendered_roi.data
    M = target_mask.data
    n = R.size
    value = float((-cfg.lambda1 * np.sum(R * M) + cfg.lambda2 * np.sum(R * (1.0 - M))) / n)
    grad = (-cfg.lambda1 * M + cfg.lambda2 * (1.0 - M)) / n
    return value, grad
