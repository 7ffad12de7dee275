"""Compiled per-pixel compositing kernels.

These walk each tile's depth-sorted splat list per pixel with the
transmittance early-out, in plain scalar code. The numpy implementations
in render.py/backward.py compute the same quantities and serve as the
reference (selected via SPLATEDIT_FORCE_NUMPY=1 or when numba is
missing).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def use_compiled() -> bool:
    return HAVE_NUMBA and os.environ.get("SPLATEDIT_FORCE_NUMPY", "") != "1"


@njit(cache=True)
def forward_kernel(means, conics, alphas, values, background,
                   tile_splats, tile_offsets, tiles_x, tile_size,
                   width, height, sigma_ceil, t_early_out, out):
    n_tiles = tile_offsets.shape[0] - 1
    n_chan = values.shape[1]
    for t in range(n_tiles):
        start = tile_offsets[t]
        end = tile_offsets[t + 1]
        ty = t // tiles_x
        tx = t - ty * tiles_x
        y_hi = min((ty + 1) * tile_size, height)
        x_hi = min((tx + 1) * tile_size, width)
        for py in range(ty * tile_size, y_hi):
            fy = py + 0.5
            for px in range(tx * tile_size, x_hi):
                fx = px + 0.5
                transmittance = 1.0
                for c in range(n_chan):
                    out[py, px, c] = 0.0
                for idx in range(start, end):
                    k = tile_splats[idx]
                    dx = fx - means[k, 0]
                    dy = fy - means[k, 1]
                    q = (conics[k, 0] * dx * dx + 2.0 * conics[k, 1] * dx * dy
                         + conics[k, 2] * dy * dy)
                    sigma = alphas[k] * math.exp(-0.5 * q)
                    if sigma > sigma_ceil:
                        sigma = sigma_ceil
                    t_next = transmittance * (1.0 - sigma)
                    if t_next < t_early_out:
                        break
                    w = sigma * transmittance
                    for c in range(n_chan):
                        out[py, px, c] += values[k, c] * w
                    transmittance = t_next
                for c in range(n_chan):
                    v = out[py, px, c] + background[c] * transmittance
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                    out[py, px, c] = v


@njit(cache=True)
def backward_kernel(means, conics, alphas, values, background,
                     tile_splats, tile_offsets, tiles_x, tile_size,
                     width, height, sigma_ceil, t_early_out, grad_img,
                     g_alpha, g_value, g_mean, g_conic):
    n_tiles = tile_offsets.shape[0] - 1
    n_chan = values.shape[1]

    max_k = 0
    for t in range(n_tiles):
        span = tile_offsets[t + 1] - tile_offsets[t]
        if span > max_k:
            max_k = span
    sig_buf = np.empty(max_k)
    gauss_buf = np.empty(max_k)
    t_buf = np.empty(max_k)

    for t in range(n_tiles):
        start = tile_offsets[t]
        end = tile_offsets[t + 1]
        if end == start:
            continue
        ty = t // tiles_x
        tx = t - ty * tiles_x
        y_hi = min((ty + 1) * tile_size, height)
        x_hi = min((tx + 1) * tile_size, width)
        for py in range(ty * tile_size, y_hi):
            fy = py + 0.5
            for px in range(tx * tile_size, x_hi):
                fx = px + 0.5

                bg_dot = 0.0
                for c in range(n_chan):
                    bg_dot += background[c] * grad_img[py, px, c]

                # Front-to-back: record each live splat's response and the
                # transmittance it saw; accumulate the total weighted dot.
                transmittance = 1.0
                n_alive = 0
                total_dot = 0.0
                for idx in range(start, end):
                    k = tile_splats[idx]
                    dx = fx - means[k, 0]
                    dy = fy - means[k, 1]
                    q = (conics[k, 0] * dx * dx + 2.0 * conics[k, 1] * dx * dy
                         + conics[k, 2] * dy * dy)
                    gauss = math.exp(-0.5 * q)
                    sigma = alphas[k] * gauss
                    if sigma > sigma_ceil:
                        sigma = sigma_ceil
                    t_next = transmittance * (1.0 - sigma)
                    if t_next < t_early_out:
                        break
                    sig_buf[n_alive] = sigma
                    gauss_buf[n_alive] = gauss
                    t_buf[n_alive] = transmittance
                    vg = 0.0
                    for c in range(n_chan):
                        vg += values[k, c] * grad_img[py, px, c]
                    total_dot += sigma * transmittance * vg
                    transmittance = t_next
                    n_alive += 1
                total_dot += bg_dot * transmittance

                prefix = 0.0
                for i in range(n_alive):
                    k = tile_splats[start + i]
                    sigma = sig_buf[i]
                    gauss = gauss_buf[i]
                    t_before = t_buf[i]
                    vg = 0.0
                    for c in range(n_chan):
                        vg += values[k, c] * grad_img[py, px, c]
                    w = sigma * t_before
                    prefix += w * vg
                    behind = total_dot - prefix
                    d_sigma = t_before * vg - behind / (1.0 - sigma)
                    for c in range(n_chan):
                        g_value[k, c] += w * grad_img[py, px, c]
                    if alphas[k] * gauss >= sigma_ceil:
                        continue  # clamped response: flat in alpha and q
                    g_alpha[k] += d_sigma * gauss
                    g_q = -0.5 * alphas[k] * gauss * d_sigma
                    dx = fx - means[k, 0]
                    dy = fy - means[k, 1]
                    g_mean[k, 0] += -g_q * 2.0 * (conics[k, 0] * dx + conics[k, 1] * dy)
                    g_mean[k, 1] += -g_q * 2.0 * (conics[k, 1] * dx + conics[k, 2] * dy)
                    g_conic[k, 0] += g_q * dx * dx
                    g_conic[k, 1] += g_q * dx * dy
                    g_conic[k, 2] += g_q * dy * dy
