"""Deterministic synthetic scenes and camera rigs for demos and tests.

The flagship fixture is a pair of well-separated colored point clusters
seen from an orbit of cameras: small enough to optimize in seconds, rich
enough to exercise segmentation, lifting, and masked editing end to end.
"""

from __future__ import annotations

import numpy as np

from .core.types import Camera, GaussianScene, logit


def look_at_camera(
    eye,
    target,
    width: int = 64,
    height: int = 64,
    focal: float = 60.0,
    up=(0.0, 0.0, 1.0),
    near_clip: float = 0.05,
) -> Camera:
    """Pinhole camera at ``eye`` looking at ``target`` (+z forward, y down)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise ValueError("look direction is parallel to the up vector")
    right = right / norm
    down = np.cross(forward, right)
    c2w = np.stack([right, down, forward], axis=1)
    rotation = c2w.T
    translation = -rotation @ eye
    return Camera(
        fx=focal,
        fy=focal,
        cx=width / 2.0,
        cy=height / 2.0,
        width=width,
        height=height,
        rotation=rotation,
        translation=translation,
        near_clip=near_clip,
    )


def orbit_cameras(
    count: int,
    radius: float = 5.0,
    elevation: float = 1.6,
    width: int = 64,
    height: int = 64,
    focal: float = 60.0,
    target=(0.0, 0.0, 0.0),
    start_angle: float = 0.26,
) -> list[Camera]:
    """Cameras on a circle around ``target``, all looking inward.

    ``start_angle`` offsets the ring so no view lines up exactly with the
    world axes (which would stack the fixture clusters in depth).
    """
    cams = []
    for i in range(count):
        theta = start_angle + 2.0 * np.pi * i / count
        eye = (radius * np.cos(theta), radius * np.sin(theta), elevation)
        cams.append(
            look_at_camera(eye, target, width=width, height=height, focal=focal)
        )
    return cams


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def make_two_cluster_scene(
    n_per_cluster: int = 50,
    separation: float = 2.4,
    spread: float = 0.22,
    seed: int = 7,
) -> GaussianScene:
    """Two colored Gaussian clusters on the x axis: red at -x, blue at +x.

    Cluster membership is by construction: indices [0, n) are red,
    [n, 2n) are blue, which gives tests an exact ground truth.
    """
    rng = np.random.default_rng(seed)
    centers = np.array([[-separation / 2.0, 0.0, 0.0], [separation / 2.0, 0.0, 0.0]])
    base_colors = np.array([[0.95, 0.05, 0.05], [0.05, 0.05, 0.95]])

    positions, colors = [], []
    for c in range(2):
        positions.append(centers[c] + rng.normal(scale=spread, size=(n_per_cluster, 3)))
        jitter = rng.uniform(-0.04, 0.04, size=(n_per_cluster, 3))
        colors.append(np.clip(base_colors[c] + jitter, 0.0, 1.0))
    positions = np.vstack(positions)
    colors = np.vstack(colors)

    n = 2 * n_per_cluster
    log_scales = np.log(rng.uniform(0.07, 0.13, size=(n, 3)))
    rotations = random_unit_quaternions(rng, n)
    opacity_logits = logit(rng.uniform(0.75, 0.92, size=n))
    return GaussianScene(
        positions=positions,
        log_scales=log_scales,
        rotations=rotations,
        colors=colors,
        opacity_logits=opacity_logits,
        background_color=(0.0, 0.0, 0.0),
    )


def red_cluster_indices(scene: GaussianScene, n_per_cluster: int = 50) -> np.ndarray:
    """Ground-truth membership mask for the red cluster of the fixture."""
    mask = np.zeros(len(scene), dtype=bool)
    mask[:n_per_cluster] = True
    return mask
