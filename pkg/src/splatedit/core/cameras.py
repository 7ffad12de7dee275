"""Camera list (de)serialization.

The on-disk format is a JSON array of objects with pinhole intrinsics and
a world-to-camera rigid pose:

    [{"fx": .., "fy": .., "cx": .., "cy": .., "width": .., "height": ..,
      "rotation": [9 floats, row-major], "translation": [3 floats]}, ...]
"""

from __future__ import annotations

import json

import numpy as np

from .types import Camera, InvalidParameterError


class CameraValidationError(ValueError):
    pass


_REQUIRED = ("fx", "fy", "cx", "cy", "width", "height", "rotation", "translation")


def load_cameras(text: str | bytes) -> list[Camera]:
    """Parse and validate a camera JSON document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CameraValidationError(f"invalid camera JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise CameraValidationError("camera document must be a JSON array")

    cameras = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise CameraValidationError(f"camera {i}: entry must be an object")
        missing = [k for k in _REQUIRED if k not in entry]
        if missing:
            raise CameraValidationError(f"camera {i}: missing fields {missing}")
        rotation = np.asarray(entry["rotation"], dtype=np.float64)
        translation = np.asarray(entry["translation"], dtype=np.float64)
        if rotation.size != 9:
            raise CameraValidationError(f"camera {i}: rotation must have 9 entries")
        if translation.size != 3:
            raise CameraValidationError(f"camera {i}: translation must have 3 entries")
        try:
            cameras.append(
                Camera(
                    fx=float(entry["fx"]),
                    fy=float(entry["fy"]),
                    cx=float(entry["cx"]),
                    cy=float(entry["cy"]),
                    width=int(entry["width"]),
                    height=int(entry["height"]),
                    rotation=rotation.reshape(3, 3),
                    translation=translation,
                    near_clip=float(entry.get("near_clip", 0.01)),
                )
            )
        except InvalidParameterError as exc:
            raise CameraValidationError(f"camera {i}: {exc}") from exc
    return cameras


def dump_cameras(cameras: list[Camera]) -> str:
    entries = [
        {
            "fx": cam.fx,
            "fy": cam.fy,
            "cx": cam.cx,
            "cy": cam.cy,
            "width": cam.width,
            "height": cam.height,
            "rotation": [float(v) for v in cam.rotation.reshape(9)],
            "translation": [float(v) for v in cam.translation],
            "near_clip": cam.near_clip,
        }
        for cam in cameras
    ]
    return json.dumps(entries, indent=2)
