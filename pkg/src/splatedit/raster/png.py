"""PNG transport for float image buffers (8-bit, deterministic encoding)."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..core.types import ImageBuffer


def encode_png(image: ImageBuffer) -> bytes:
    """8-bit PNG bytes; grayscale for 1-channel buffers, RGB otherwise."""
    arr = np.clip(image.data, 0.0, 1.0)
    u8 = np.round(arr * 255.0).astype(np.uint8)
    if image.channels == 1:
        pil = Image.fromarray(u8[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(u8, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> ImageBuffer:
    """Decode PNG bytes into a float buffer in [0, 1].

    Grayscale stays single-channel; anything else converts to RGB.
    """
    pil = Image.open(io.BytesIO(data))
    if pil.mode == "L":
        arr = np.asarray(pil, dtype=np.float64)[:, :, None]
    else:
        arr = np.asarray(pil.convert("RGB"), dtype=np.float64)
    return ImageBuffer(arr / 255.0)
