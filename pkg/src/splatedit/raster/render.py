"""Tile-based forward splatting of color and RoI channels, plus picking.

Per pixel, visible splats composite front to back: each contributes
value * sigma * T where sigma = alpha * exp(-0.5 d' conic d) and the
transmittance T is the running product of (1 - sigma) over closer
splats. Compositing stops early once T drops below T_EARLY_OUT. The
color channel composites the scene background against the remaining
transmittance; the RoI channel composites the per-point RoI attribute
over an implicit zero background.

The hot path runs through the compiled kernels in kernels.py; the numpy
implementation here computes identical quantities (up to summation
order) and serves as the reference and fallback.
"""

from __future__ import annotations

import numpy as np

from ..core.types import Camera, ContractError, GaussianScene, ImageBuffer
from .projection import ProjectedScene, SIGMA_CEIL, T_EARLY_OUT
from . import kernels

TILE = 16
PICK_THRESHOLD = 0.3

CHANNELS = {"color": 3, "roi": 1}


def _channel_values(scene: GaussianScene, proj: ProjectedScene, channel: str):
    """Per-splat composited values (K, C) and the background vector (C,)."""
    if channel == "color":
        return scene.colors[proj.indices], scene.background_color
    if channel == "roi":
        return scene.roi_values[proj.indices][:, None], np.zeros(1)
    raise ContractError(f"unknown channel {channel!r}")


def _tile_lists(proj: ProjectedScene, width: int, height: int) -> list[list[int]]:
    """Splat positions (into proj order) per 16x16 tile, front-to-back."""
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    lists: list[list[int]] = [[] for _ in range(tiles_x * tiles_y)]
    tx0 = proj.x0 // TILE
    tx1 = proj.x1 // TILE
    ty0 = proj.y0 // TILE
    ty1 = proj.y1 // TILE
    for k in range(len(proj)):
        for ty in range(ty0[k], ty1[k] + 1):
            row = ty * tiles_x
            for tx in range(tx0[k], tx1[k] + 1):
                lists[row + tx].append(k)
    return lists


def _flat_tiles(proj: ProjectedScene, width: int, height: int):
    """Tile lists flattened for the kernels: (splat ids, tile offsets)."""
    lists = _tile_lists(proj, width, height)
    offsets = np.zeros(len(lists) + 1, dtype=np.int64)
    for i, members in enumerate(lists):
        offsets[i + 1] = offsets[i] + len(members)
    flat = np.empty(offsets[-1], dtype=np.int64)
    for i, members in enumerate(lists):
        flat[offsets[i] : offsets[i + 1]] = members
    return flat, offsets


def _conic_triplets(proj: ProjectedScene) -> np.ndarray:
    out = np.empty((len(proj), 3))
    out[:, 0] = proj.conics[:, 0, 0]
    out[:, 1] = proj.conics[:, 0, 1]
    out[:, 2] = proj.conics[:, 1, 1]
    return out


def _tile_pixels(tx: int, ty: int, width: int, height: int):
    """Pixel-center coordinate arrays for one tile."""
    x_lo = tx * TILE
    y_lo = ty * TILE
    xs = np.arange(x_lo, min(x_lo + TILE, width), dtype=np.float64) + 0.5
    ys = np.arange(y_lo, min(y_lo + TILE, height), dtype=np.float64) + 0.5
    return xs, ys


def _tile_response(proj: ProjectedScene, ks: np.ndarray, alphas: np.ndarray,
                   xs: np.ndarray, ys: np.ndarray):
    """Splat responses on a tile: offsets, gaussian falloff, and sigma.

    Returns (dx, dy, G, sigma) with shape (K, P) where P = len(xs)*len(ys)
    flattened row-major.
    """
    pixel_x = np.tile(xs, len(ys))
    pixel_y = np.repeat(ys, len(xs))
    dx = pixel_x[None, :] - proj.means2d[ks, 0][:, None]
    dy = pixel_y[None, :] - proj.means2d[ks, 1][:, None]
    c00 = proj.conics[ks, 0, 0][:, None]
    c01 = proj.conics[ks, 0, 1][:, None]
    c11 = proj.conics[ks, 1, 1][:, None]
    q = c00 * dx * dx + 2.0 * c01 * dx * dy + c11 * dy * dy
    G = np.exp(-0.5 * q)
    sigma = np.minimum(alphas[ks][:, None] * G, SIGMA_CEIL)
    return dx, dy, G, sigma


def _transmittance_scan(sigma: np.ndarray):
    """Front-to-back transmittance with the early-out applied.

    Returns (weights, t_final, alive, t_before): weights[k, p] is
    sigma * T for live splats (zero once transmittance would fall below
    the floor), t_final is the per-pixel transmittance left for the
    background, and alive marks the splats that composite.
    """
    t_cum = np.cumprod(1.0 - sigma, axis=0)
    alive = t_cum >= T_EARLY_OUT
    t_before = np.vstack([np.ones((1, sigma.shape[1])), t_cum[:-1]])
    weights = sigma * t_before * alive
    n_alive = alive.sum(axis=0)
    t_final = np.where(
        n_alive > 0,
        t_cum[np.maximum(n_alive - 1, 0), np.arange(sigma.shape[1])],
        1.0,
    )
    return weights, t_final, alive, t_before


def _render_numpy(proj, values, background, alphas, width, height) -> np.ndarray:
    out = np.empty((height, width, len(background)))
    out[:] = background
    lists = _tile_lists(proj, width, height)
    tiles_x = (width + TILE - 1) // TILE
    for tile_id, members in enumerate(lists):
        if not members:
            continue
        ty, tx = divmod(tile_id, tiles_x)
        xs, ys = _tile_pixels(tx, ty, width, height)
        ks = np.asarray(members, dtype=np.int64)
        _, _, _, sigma = _tile_response(proj, ks, alphas, xs, ys)
        weights, t_final, _, _ = _transmittance_scan(sigma)
        tile = weights.T @ values[ks] + background[None, :] * t_final[:, None]
        out[ty * TILE : ty * TILE + len(ys), tx * TILE : tx * TILE + len(xs)] = (
            tile.reshape(len(ys), len(xs), -1)
        )
    np.clip(out, 0.0, 1.0, out=out)
    return out


def render(scene: GaussianScene, camera: Camera, channel: str = "color") -> ImageBuffer:
    """Rasterize the scene into a float image for the given channel."""
    if channel not in CHANNELS:
        raise ContractError(f"unknown channel {channel!r}")
    proj = ProjectedScene(scene, camera)
    values, background = _channel_values(scene, proj, channel)
    width, height = camera.width, camera.height

    if len(proj) == 0:
        out = np.empty((height, width, len(background)))
        out[:] = np.clip(background, 0.0, 1.0)
        return ImageBuffer(out)

    alphas = scene.opacities[proj.indices]
    if kernels.use_compiled():
        flat, offsets = _flat_tiles(proj, width, height)
        out = np.empty((height, width, len(background)))
        kernels.forward_kernel(
            proj.means2d, _conic_triplets(proj), alphas, values, background,
            flat, offsets, (width + TILE - 1) // TILE, TILE, width, height,
            SIGMA_CEIL, T_EARLY_OUT, out,
        )
    else:
        out = _render_numpy(proj, values, background, alphas, width, height)
    return ImageBuffer(out)


def pick(scene: GaussianScene, camera: Camera, pixel: tuple[int, int],
         threshold: float = PICK_THRESHOLD) -> int | None:
    """Index of the front-most splat whose sigma at ``pixel`` exceeds
    ``threshold``; ``None`` when nothing qualifies.

    ``pixel`` is (x, y) in image coordinates; out-of-bounds is an error.
    """
    x, y = pixel
    if not (0 <= x < camera.width and 0 <= y < camera.height):
        raise ContractError(f"pixel {pixel} outside {camera.width}x{camera.height} image")
    proj = ProjectedScene(scene, camera)
    if len(proj) == 0:
        return None
    hits = (proj.x0 <= x) & (x <= proj.x1) & (proj.y0 <= y) & (y <= proj.y1)
    ks = np.nonzero(hits)[0]
    if len(ks) == 0:
        return None
    alphas = scene.opacities[proj.indices]
    _, _, _, sigma = _tile_response(
        proj, ks, alphas, np.array([x + 0.5]), np.array([y + 0.5])
    )
    above = np.nonzero(sigma[:, 0] > threshold)[0]
    if len(above) == 0:
        return None
    return int(proj.indices[ks[above[0]]])
