"""Perspective projection of 3D Gaussians to screen-space splats.

A 3D covariance is mapped to the image plane with the first-order
Jacobian of the pinhole projection evaluated at the point center,
cov2d = (J W) Σ (J W)ᵀ, then dilated by a small isotropic floor for
anti-aliasing and numerical safety. All quantities stay in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import Camera, Gaussian, GaussianScene, normalize_quaternion, quaternion_to_rotation

# Isotropic variance added to both cov2d eigenvalues (pixels^2).
COV2D_DILATION = 0.3
# Evaluation support: pixels within this many standard deviations.
EVAL_SIGMA = 3.0
# Cull radius: 99% mass ellipse, sqrt of the chi-square(2) 0.99 quantile.
CULL_SIGMA = 3.0348542587702925
# Per-pixel opacity responses cap below 1. The cap leaves enough
# transmittance (2e-4, above the early-out floor even after rounding)
# that a front splat can never knock itself out of the compositing.
SIGMA_CEIL = 1.0 - 2e-4
# Compositing stops once transmittance falls below this.
T_EARLY_OUT = 1e-4


@dataclass
class Splat2D:
    """A single projected Gaussian in screen space."""

    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    source_index: int


class ProjectedScene:
    """Batch of visible splats, depth-sorted front to back.

    Ties in depth break by ascending source index (stable sort), which
    makes compositing deterministic. Intermediates needed by the backward
    pass (camera-space points, rotations, scales) are kept alongside.
    """

    def __init__(self, scene: GaussianScene, camera: Camera):
        self.camera = camera
        self.n_total = len(scene)
        W = camera.rotation
        t = scene.positions @ W.T + camera.translation  # (N, 3)
        depths = t[:, 2]
        in_front = depths > camera.near_clip

        idx = np.nonzero(in_front)[0]
        t = t[idx]
        depths = depths[idx]

        if len(idx) == 0:
            self._finalize_empty()
            return

        fx, fy = camera.fx, camera.fy
        inv_z = 1.0 / depths
        u = fx * t[:, 0] * inv_z + camera.cx
        v = fy * t[:, 1] * inv_z + camera.cy
        means2d = np.stack([u, v], axis=1)

        quats = normalize_quaternion(scene.rotations[idx])
        R = quaternion_to_rotation(quats)  # (K, 3, 3)
        s = np.exp(scene.log_scales[idx])  # (K, 3)
        M3 = R * s[:, None, :]  # R @ diag(s)
        cov3d = M3 @ np.transpose(M3, (0, 2, 1))

        J = np.zeros((len(idx), 2, 3))
        J[:, 0, 0] = fx * inv_z
        J[:, 0, 2] = -fx * t[:, 0] * inv_z**2
        J[:, 1, 1] = fy * inv_z
        J[:, 1, 2] = -fy * t[:, 1] * inv_z**2
        M = J @ W  # (K, 2, 3)
        cov2d = M @ cov3d @ np.transpose(M, (0, 2, 1))
        cov2d[:, 0, 0] += COV2D_DILATION
        cov2d[:, 1, 1] += COV2D_DILATION

        # Largest eigenvalue of each 2x2 covariance for extent estimates.
        mid = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
        det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
        lam_max = mid + np.sqrt(np.maximum(mid**2 - det, 0.0))
        sigma_max = np.sqrt(lam_max)

        cull_r = CULL_SIGMA * sigma_max
        on_image = (
            (u + cull_r > 0.0)
            & (u - cull_r < camera.width)
            & (v + cull_r > 0.0)
            & (v - cull_r < camera.height)
        )

        idx = idx[on_image]
        if len(idx) == 0:
            self._finalize_empty()
            return
        order = np.argsort(depths[on_image], kind="stable")

        def take(arr):
            return arr[on_image][order]

        self.indices = idx[order]
        self.depths = take(depths)
        self.means2d = take(means2d)
        self.cov2d = take(cov2d)
        self.t_cam = take(t)
        self.rot_mats = take(R)
        self.scales = take(s)
        self.quats_norm = take(quats)
        self.raw_quat_norms = np.linalg.norm(scene.rotations[self.indices], axis=1)
        self.proj_mats = take(M)

        det = take(det)
        self.conics = np.empty_like(self.cov2d)
        self.conics[:, 0, 0] = self.cov2d[:, 1, 1] / det
        self.conics[:, 1, 1] = self.cov2d[:, 0, 0] / det
        self.conics[:, 0, 1] = -self.cov2d[:, 0, 1] / det
        self.conics[:, 1, 0] = self.conics[:, 0, 1]

        radius = EVAL_SIGMA * take(sigma_max)
        # Inclusive pixel-index bounds of the evaluated rectangle.
        self.x0 = np.maximum(np.floor(self.means2d[:, 0] - radius - 0.5), 0).astype(np.int64)
        self.x1 = np.minimum(np.ceil(self.means2d[:, 0] + radius - 0.5), camera.width - 1).astype(np.int64)
        self.y0 = np.maximum(np.floor(self.means2d[:, 1] - radius - 0.5), 0).astype(np.int64)
        self.y1 = np.minimum(np.ceil(self.means2d[:, 1] + radius - 0.5), camera.height - 1).astype(np.int64)
        keep = (self.x0 <= self.x1) & (self.y0 <= self.y1)
        if not np.all(keep):
            for name in ("indices", "depths", "means2d", "cov2d", "t_cam", "rot_mats",
                         "scales", "quats_norm", "raw_quat_norms", "proj_mats", "conics",
                         "x0", "x1", "y0", "y1"):
                setattr(self, name, getattr(self, name)[keep])

    def _finalize_empty(self):
        self.indices = np.zeros(0, dtype=np.int64)
        self.depths = np.zeros(0)
        self.means2d = np.zeros((0, 2))
        self.cov2d = np.zeros((0, 2, 2))
        self.conics = np.zeros((0, 2, 2))
        self.t_cam = np.zeros((0, 3))
        self.rot_mats = np.zeros((0, 3, 3))
        self.scales = np.zeros((0, 3))
        self.quats_norm = np.zeros((0, 4))
        self.raw_quat_norms = np.zeros(0)
        self.proj_mats = np.zeros((0, 2, 3))
        self.x0 = np.zeros(0, dtype=np.int64)
        self.x1 = np.zeros(0, dtype=np.int64)
        self.y0 = np.zeros(0, dtype=np.int64)
        self.y1 = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.indices)


def project(gaussian: Gaussian, camera: Camera) -> Splat2D | None:
    """Project a single Gaussian; ``None`` when culled.

    Culls points at or behind the near plane and splats whose 99% extent
    ellipse misses the image entirely.
    """
    scene = GaussianScene.from_gaussians([gaussian])
    proj = ProjectedScene(scene, camera)
    if len(proj) == 0:
        return None
    return Splat2D(
        mean2d=proj.means2d[0].copy(),
        cov2d=proj.cov2d[0].copy(),
        depth=float(proj.depths[0]),
        source_index=0,
    )
