"""Lifting image-space RoI masks onto the per-Gaussian RoI attribute.

Only the RoI logits are optimized; geometry, color, and opacity stay
frozen. Because the RoI attribute enters the compositing linearly (the
transmittance depends on opacities alone), each view's render collapses
to a fixed sparse weight matrix over splat-pixel pairs. The cache below
precomputes those weights once per view, which makes a lifting run a few
hundred cheap linear passes instead of full re-renders; the numbers are
the same as render()/render_backward() on the RoI channel.
"""

from __future__ import annotations

import numpy as np

from ..core.types import Camera, ContractError, GaussianScene, ImageBuffer, sigmoid
from ..optim.adam import AdamState, adam_step
from ..optim.losses import LiftConfig, lift_loss
from ..raster.projection import ProjectedScene
from ..raster.render import (
    TILE,
    _tile_lists,
    _tile_pixels,
    _tile_response,
    _transmittance_scan,
)
from .types import GaussianRoi


class RoiCompositeCache:
    """Fixed splat-to-pixel compositing weights for one view."""

    def __init__(self, scene: GaussianScene, camera: Camera):
        self.shape = (camera.height, camera.width)
        self.n = len(scene)
        proj = ProjectedScene(scene, camera)
        alphas = scene.opacities[proj.indices] if len(proj) else np.zeros(0)

        splat_ids: list[np.ndarray] = []
        pixel_ids: list[np.ndarray] = []
        weights: list[np.ndarray] = []
        if len(proj):
            lists = _tile_lists(proj, camera.width, camera.height)
            tiles_x = (camera.width + TILE - 1) // TILE
            for tile_id, members in enumerate(lists):
                if not members:
                    continue
                ty, tx = divmod(tile_id, tiles_x)
                xs, ys = _tile_pixels(tx, ty, camera.width, camera.height)
                ks = np.asarray(members, dtype=np.int64)
                _, _, _, sigma = _tile_response(proj, ks, alphas, xs, ys)
                w, _, _, _ = _transmittance_scan(sigma)  # (K, P)

                cols = np.arange(xs[0] - 0.5, xs[0] - 0.5 + len(xs), dtype=np.int64)
                rows = np.arange(ys[0] - 0.5, ys[0] - 0.5 + len(ys), dtype=np.int64)
                flat_pixels = (rows[:, None] * camera.width + cols[None, :]).reshape(-1)
                kk, pp = np.nonzero(w > 0.0)
                splat_ids.append(proj.indices[ks[kk]])
                pixel_ids.append(flat_pixels[pp])
                weights.append(w[kk, pp])

        if splat_ids:
            self.splat_ids = np.concatenate(splat_ids)
            self.pixel_ids = np.concatenate(pixel_ids)
            self.weights = np.concatenate(weights)
        else:
            self.splat_ids = np.zeros(0, dtype=np.int64)
            self.pixel_ids = np.zeros(0, dtype=np.int64)
            self.weights = np.zeros(0)

    def render_roi(self, roi_values: np.ndarray) -> ImageBuffer:
        flat = np.bincount(
            self.pixel_ids,
            weights=self.weights * roi_values[self.splat_ids],
            minlength=self.shape[0] * self.shape[1],
        )
        return ImageBuffer(np.clip(flat.reshape(*self.shape, 1), 0.0, 1.0))

    def backward_roi(self, grad_image: np.ndarray) -> np.ndarray:
        """dLoss/d(roi value) per Gaussian from a per-pixel gradient."""
        flat_grad = grad_image.reshape(-1)
        return np.bincount(
            self.splat_ids,
            weights=self.weights * flat_grad[self.pixel_ids],
            minlength=self.n,
        )


def lift_roi(
    scene: GaussianScene,
    masks: list[tuple[Camera, ImageBuffer]],
    cfg: LiftConfig,
) -> GaussianRoi:
    """Optimize the scene's RoI logits to match the target masks.

    The scene is mutated in place (RoI logits only; everything else is
    bit-frozen). Runs ``cfg.iterations`` epochs of one Adam step per
    view and returns the thresholded membership with the soft values.
    """
    if not masks:
        raise ContractError("lifting needs at least one mask")
    for camera, mask in masks:
        if (mask.height, mask.width) != (camera.height, camera.width):
            raise ContractError("mask dims do not match their camera")

    caches = [(RoiCompositeCache(scene, camera), mask) for camera, mask in masks]
    params = {"roi_logits": scene.roi_logits}
    state = AdamState.for_params(params, lr=cfg.lr)

    for iteration in range(cfg.iterations):
        for cache, mask in caches:
            roi_values = sigmoid(params["roi_logits"])
            rendered = cache.render_roi(roi_values)
            value, grad_img = lift_loss(rendered, mask, cfg)
            if not np.isfinite(value):
                raise RuntimeError(
                    f"lifting diverged at iteration {iteration}: loss={value}"
                )
            d_roi = cache.backward_roi(grad_img[:, :, 0])
            d_logits = d_roi * roi_values * (1.0 - roi_values)
            params = adam_step(params, {"roi_logits": d_logits}, state)

    scene.roi_logits[:] = params["roi_logits"]
    return GaussianRoi.from_scene(scene, cfg.threshold)
