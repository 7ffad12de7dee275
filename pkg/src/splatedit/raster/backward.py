"""Analytic gradients of the splatting forward pass.

The compositing order is treated as fixed (sorting is not
differentiated). For a pixel value C = sum_i v_i s_i T_i + bg * T_end,
the derivative with respect to s_i is v_i T_i - A_i / (1 - s_i) where
A_i collects every contribution behind splat i including the background
term; splats dropped by the transmittance early-out contribute nothing
and receive nothing. Screen-space gradients then chain through the
conic, the projection Jacobian, the camera transform, and the
scale/quaternion covariance factorization.

The forward clamp of the output image to [0, 1] is treated as identity
here: the unclamped compositing value is already inside [0, 1] up to
floating-point rounding, so the clamp never moves an interior value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import Camera, ContractError, GaussianScene, ImageBuffer
from .projection import ProjectedScene, SIGMA_CEIL, T_EARLY_OUT
from . import kernels
from .render import (
    CHANNELS,
    TILE,
    _channel_values,
    _conic_triplets,
    _flat_tiles,
    _tile_lists,
    _tile_pixels,
    _tile_response,
    _transmittance_scan,
)


@dataclass
class GradientBuffer:
    """Per-Gaussian partial derivatives in the scene parameter layout."""

    d_positions: np.ndarray
    d_log_scales: np.ndarray
    d_rotations: np.ndarray
    d_colors: np.ndarray
    d_opacity_logits: np.ndarray
    d_roi_logits: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "GradientBuffer":
        return cls(
            d_positions=np.zeros((n, 3)),
            d_log_scales=np.zeros((n, 3)),
            d_rotations=np.zeros((n, 4)),
            d_colors=np.zeros((n, 3)),
            d_opacity_logits=np.zeros(n),
            d_roi_logits=np.zeros(n),
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        """Gradients keyed by the scene attribute they differentiate."""
        return {
            "positions": self.d_positions,
            "log_scales": self.d_log_scales,
            "rotations": self.d_rotations,
            "colors": self.d_colors,
            "opacity_logits": self.d_opacity_logits,
            "roi_logits": self.d_roi_logits,
        }

    def masked(self, membership: np.ndarray) -> "GradientBuffer":
        """Copy with every per-Gaussian entry multiplied by a 0/1 mask."""
        m = np.asarray(membership, dtype=np.float64)
        if m.shape != self.d_opacity_logits.shape:
            raise ContractError("mask length does not match gradient buffer")
        return GradientBuffer(
            d_positions=self.d_positions * m[:, None],
            d_log_scales=self.d_log_scales * m[:, None],
            d_rotations=self.d_rotations * m[:, None],
            d_colors=self.d_colors * m[:, None],
            d_opacity_logits=self.d_opacity_logits * m,
            d_roi_logits=self.d_roi_logits * m,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.as_dict().values())


def _quat_rotation_grad(g_R: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Contract dL/dR with the quaternion-to-matrix Jacobian at unit q."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    k = g_R
    gw = 2.0 * (-k[:, 0, 1] * z + k[:, 0, 2] * y + k[:, 1, 0] * z
                - k[:, 1, 2] * x - k[:, 2, 0] * y + k[:, 2, 1] * x)
    gx = 2.0 * (k[:, 0, 1] * y + k[:, 0, 2] * z + k[:, 1, 0] * y
                - 2.0 * k[:, 1, 1] * x - k[:, 1, 2] * w + k[:, 2, 0] * z
                + k[:, 2, 1] * w - 2.0 * k[:, 2, 2] * x)
    gy = 2.0 * (-2.0 * k[:, 0, 0] * y + k[:, 0, 1] * x + k[:, 0, 2] * w
                + k[:, 1, 0] * x + k[:, 1, 2] * z - k[:, 2, 0] * w
                + k[:, 2, 1] * z - 2.0 * k[:, 2, 2] * y)
    gz = 2.0 * (-2.0 * k[:, 0, 0] * z - k[:, 0, 1] * w + k[:, 0, 2] * x
                + k[:, 1, 0] * w - 2.0 * k[:, 1, 1] * z + k[:, 1, 2] * y
                + k[:, 2, 0] * x + k[:, 2, 1] * y)
    return np.stack([gw, gx, gy, gz], axis=1)


def _pixel_stage_numpy(proj, values, background, alphas, grad_img, width, height):
    """Per-splat screen-space gradients, accumulated tile by tile."""
    K = len(proj)
    g_alpha = np.zeros(K)
    g_value = np.zeros((K, values.shape[1]))
    g_mean = np.zeros((K, 2))
    g_conic = np.zeros((K, 2, 2))

    lists = _tile_lists(proj, width, height)
    tiles_x = (width + TILE - 1) // TILE
    for tile_id, members in enumerate(lists):
        if not members:
            continue
        ty, tx = divmod(tile_id, tiles_x)
        xs, ys = _tile_pixels(tx, ty, width, height)
        ks = np.asarray(members, dtype=np.int64)
        dx, dy, G, sigma = _tile_response(proj, ks, alphas, xs, ys)
        weights, t_final, alive, t_before = _transmittance_scan(sigma)

        g_px = grad_img[
            ty * TILE : ty * TILE + len(ys), tx * TILE : tx * TILE + len(xs)
        ].reshape(-1, values.shape[1])

        vals = values[ks]
        # The channel contraction commutes with the prefix sum, so the
        # "everything behind splat i" term needs only (K, P) arrays.
        value_dot = vals @ g_px.T  # (K, P)
        weighted_dot = weights * value_dot
        behind_dot = (
            weighted_dot.sum(axis=0) + (background @ g_px.T) * t_final
        )[None, :] - np.cumsum(weighted_dot, axis=0)

        d_sigma = (t_before * value_dot - behind_dot / (1.0 - sigma)) * alive
        d_sigma[alphas[ks][:, None] * G >= SIGMA_CEIL] = 0.0  # clamped: flat

        g_alpha[ks] += (d_sigma * G).sum(axis=1)
        g_value[ks] += np.einsum("kp,pc->kc", weights, g_px)

        g_q = -0.5 * alphas[ks][:, None] * G * d_sigma
        c00 = proj.conics[ks, 0, 0][:, None]
        c01 = proj.conics[ks, 0, 1][:, None]
        c11 = proj.conics[ks, 1, 1][:, None]
        g_mean[ks, 0] += -(g_q * 2.0 * (c00 * dx + c01 * dy)).sum(axis=1)
        g_mean[ks, 1] += -(g_q * 2.0 * (c01 * dx + c11 * dy)).sum(axis=1)
        g_conic[ks, 0, 0] += (g_q * dx * dx).sum(axis=1)
        g_conic[ks, 0, 1] += (g_q * dx * dy).sum(axis=1)
        g_conic[ks, 1, 0] += (g_q * dx * dy).sum(axis=1)
        g_conic[ks, 1, 1] += (g_q * dy * dy).sum(axis=1)
    return g_alpha, g_value, g_mean, g_conic


def _pixel_stage_compiled(proj, values, background, alphas, grad_img, width, height):
    K = len(proj)
    g_alpha = np.zeros(K)
    g_value = np.zeros((K, values.shape[1]))
    g_mean = np.zeros((K, 2))
    g_conic3 = np.zeros((K, 3))
    flat, offsets = _flat_tiles(proj, width, height)
    kernels.backward_kernel(
        proj.means2d, _conic_triplets(proj), alphas, values, background,
        flat, offsets, (width + TILE - 1) // TILE, TILE, width, height,
        SIGMA_CEIL, T_EARLY_OUT, np.ascontiguousarray(grad_img),
        g_alpha, g_value, g_mean, g_conic3,
    )
    g_conic = np.empty((K, 2, 2))
    g_conic[:, 0, 0] = g_conic3[:, 0]
    g_conic[:, 0, 1] = g_conic3[:, 1]
    g_conic[:, 1, 0] = g_conic3[:, 1]
    g_conic[:, 1, 1] = g_conic3[:, 2]
    return g_alpha, g_value, g_mean, g_conic


def render_backward(
    scene: GaussianScene,
    camera: Camera,
    channel: str,
    upstream_grad: ImageBuffer,
) -> GradientBuffer:
    """Exact gradients of ``render`` with respect to scene parameters.

    ``upstream_grad`` holds dLoss/dPixel in the render's image layout.
    The color channel populates color/geometry/opacity partials; the RoI
    channel populates the RoI partial plus the same geometry/opacity
    partials (callers typically freeze the latter during lifting).
    """
    if channel not in CHANNELS:
        raise ContractError(f"unknown channel {channel!r}")
    if (upstream_grad.height, upstream_grad.width, upstream_grad.channels) != (
        camera.height, camera.width, CHANNELS[channel]
    ):
        raise ContractError(
            "upstream gradient dims "
            f"{(upstream_grad.height, upstream_grad.width, upstream_grad.channels)} "
            f"do not match render output {(camera.height, camera.width, CHANNELS[channel])}"
        )

    out = GradientBuffer.zeros(len(scene))
    proj = ProjectedScene(scene, camera)
    if len(proj) == 0:
        return out

    values, background = _channel_values(scene, proj, channel)
    alphas = scene.opacities[proj.indices]
    stage = _pixel_stage_compiled if kernels.use_compiled() else _pixel_stage_numpy
    g_alpha, g_value, g_mean, g_conic = stage(
        proj, values, background, alphas, upstream_grad.data,
        camera.width, camera.height,
    )

    # --- chain through the projection geometry, batched over splats ---
    K = len(proj)
    conic = proj.conics
    g_cov2d = -conic @ g_conic @ conic

    M = proj.proj_mats  # (K, 2, 3) = J @ W
    M3 = proj.rot_mats * proj.scales[:, None, :]  # R @ diag(s)
    cov3d = M3 @ np.transpose(M3, (0, 2, 1))
    g_M = 2.0 * g_cov2d @ M @ cov3d
    g_cov3d = np.transpose(M, (0, 2, 1)) @ g_cov2d @ M

    W = camera.rotation
    g_J = g_M @ W.T

    t = proj.t_cam
    inv_z = 1.0 / t[:, 2]
    inv_z2 = inv_z * inv_z
    fx, fy = camera.fx, camera.fy
    g_u, g_v = g_mean[:, 0], g_mean[:, 1]
    g_t = np.empty((K, 3))
    g_t[:, 0] = g_u * fx * inv_z - g_J[:, 0, 2] * fx * inv_z2
    g_t[:, 1] = g_v * fy * inv_z - g_J[:, 1, 2] * fy * inv_z2
    g_t[:, 2] = (
        -g_u * fx * t[:, 0] * inv_z2
        - g_v * fy * t[:, 1] * inv_z2
        - g_J[:, 0, 0] * fx * inv_z2
        - g_J[:, 1, 1] * fy * inv_z2
        + g_J[:, 0, 2] * 2.0 * fx * t[:, 0] * inv_z2 * inv_z
        + g_J[:, 1, 2] * 2.0 * fy * t[:, 1] * inv_z2 * inv_z
    )
    g_pos = g_t @ W

    g_M3 = 2.0 * g_cov3d @ M3
    Rt_gM3 = np.transpose(proj.rot_mats, (0, 2, 1)) @ g_M3
    g_log_scale = proj.scales * np.diagonal(Rt_gM3, axis1=1, axis2=2)
    g_R = g_M3 * proj.scales[:, None, :]

    g_qn = _quat_rotation_grad(g_R, proj.quats_norm)
    # Through the internal normalization q/|q| used by the renderer.
    dot = np.sum(g_qn * proj.quats_norm, axis=1, keepdims=True)
    g_quat = (g_qn - proj.quats_norm * dot) / proj.raw_quat_norms[:, None]

    idx = proj.indices
    out.d_positions[idx] = g_pos
    out.d_log_scales[idx] = g_log_scale
    out.d_rotations[idx] = g_quat
    out.d_opacity_logits[idx] = g_alpha * alphas * (1.0 - alphas)
    if channel == "color":
        out.d_colors[idx] = g_value
    else:
        r = scene.roi_values[idx]
        out.d_roi_logits[idx] = g_value[:, 0] * r * (1.0 - r)
    return out
