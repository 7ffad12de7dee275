"""Core domain types: Gaussian point scenes, cameras, images, and 3D boxes.

Scenes are stored as structure-of-arrays for fast vectorized math; the
``Gaussian`` record is a convenience view for building and inspecting
single points. Opacity and the RoI attribute are kept as logits so the
optimizer works on unconstrained parameters; their activated values are
always strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InvalidParameterError(ValueError):
    """Raised when an operation receives non-finite or out-of-contract inputs."""


class ContractError(ValueError):
    """Raised when call arguments violate an operation's preconditions."""


_SIGMOID_LO = np.nextafter(0.0, 1.0)
_SIGMOID_HI = np.nextafter(1.0, 0.0)


def sigmoid(x):
    """Numerically stable logistic function.

    Outputs are pinched to the nearest representable values inside (0, 1)
    so activated opacities and RoI attributes never saturate exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    out = np.clip(out, _SIGMOID_LO, _SIGMOID_HI)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    """Inverse of :func:`sigmoid`; input must be strictly inside (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise InvalidParameterError("logit argument must lie strictly inside (0, 1)")
    out = np.log(p) - np.log1p(-p)
    if out.ndim == 0:
        return float(out)
    return out


# Default logit for points outside the region of interest: activated value
# ~1.2e-4, the closest practical stand-in for "initialized to 0".
ROI_LOGIT_OFF = -9.0

_QUAT_UNIT_TOL = 1e-6


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix (or matrices) from w-first unit quaternions.

    Accepts shape (4,) or (N, 4); the quaternion is assumed unit-norm.
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    R[:, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[:, 0, 1] = 2.0 * (x * y - w * z)
    R[:, 0, 2] = 2.0 * (x * z + w * y)
    R[:, 1, 0] = 2.0 * (x * y + w * z)
    R[:, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[:, 1, 2] = 2.0 * (y * z - w * x)
    R[:, 2, 0] = 2.0 * (x * z - w * y)
    R[:, 2, 1] = 2.0 * (y * z + w * x)
    R[:, 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R[0] if single else R


def normalize_quaternion(q: np.ndarray) -> np.ndarray:
    """Unit-norm copy of w-first quaternion(s); zero-norm input is an error."""
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise InvalidParameterError("cannot normalize a zero quaternion")
    return q / norm


def covariance_from_params(log_scale: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """3D covariance R S Sᵀ Rᵀ with S = diag(exp(log_scale)).

    ``rotation`` is a w-first unit quaternion. The result is symmetric
    positive definite with eigenvalues exp(2 * log_scale).
    """
    log_scale = np.asarray(log_scale, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    if not (np.all(np.isfinite(log_scale)) and np.all(np.isfinite(rotation))):
        raise InvalidParameterError("covariance parameters must be finite")
    if abs(np.linalg.norm(rotation) - 1.0) > _QUAT_UNIT_TOL:
        raise InvalidParameterError("rotation quaternion must be unit-norm")
    R = quaternion_to_rotation(rotation)
    M = R * np.exp(log_scale)[None, :]  # columns scaled: R @ diag(s)
    return M @ M.T


@dataclass
class Gaussian:
    """A single anisotropic Gaussian point.

    position     world-space center (3,)
    log_scale    log of per-axis standard deviation (3,)
    rotation     w-first unit quaternion (4,)
    color        RGB in [0, 1] (3,)
    opacity_logit  opacity = sigmoid(opacity_logit)
    roi_logit      RoI attribute r = sigmoid(roi_logit)
    """

    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    color: np.ndarray
    opacity_logit: float
    roi_logit: float = ROI_LOGIT_OFF

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.log_scale = np.asarray(self.log_scale, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        self.opacity_logit = float(self.opacity_logit)
        self.roi_logit = float(self.roi_logit)
        for name in ("position", "log_scale", "rotation", "color"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidParameterError(f"non-finite {name}")
        # Loose bound: tolerates float32-sourced data, catches junk. The
        # optimizer renormalizes exactly after every step.
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-3:
            raise InvalidParameterError("rotation quaternion must be unit-norm")
        if np.any(self.color < 0.0) or np.any(self.color > 1.0):
            raise InvalidParameterError("color must lie in [0, 1]")

    @property
    def opacity(self) -> float:
        return sigmoid(self.opacity_logit)

    @property
    def roi(self) -> float:
        return sigmoid(self.roi_logit)

    def covariance(self) -> np.ndarray:
        return covariance_from_params(self.log_scale, self.rotation)


# Attribute names in the canonical optimizer layout, in storage order.
SCENE_ATTRIBUTES = (
    "positions",
    "log_scales",
    "rotations",
    "colors",
    "opacity_logits",
    "roi_logits",
)


class GaussianScene:
    """An ordered collection of Gaussians plus a background color.

    Indices are stable identifiers: nothing in this package reorders,
    inserts, or deletes points once a scene exists. All arrays are float64
    and owned by the scene.
    """

    def __init__(
        self,
        positions: np.ndarray,
        log_scales: np.ndarray,
        rotations: np.ndarray,
        colors: np.ndarray,
        opacity_logits: np.ndarray,
        roi_logits: np.ndarray | None = None,
        background_color: Sequence[float] = (0.0, 0.0, 0.0),
    ):
        n = len(positions)
        self.positions = np.array(positions, dtype=np.float64).reshape(n, 3)
        self.log_scales = np.array(log_scales, dtype=np.float64).reshape(n, 3)
        self.rotations = np.array(rotations, dtype=np.float64).reshape(n, 4)
        self.colors = np.array(colors, dtype=np.float64).reshape(n, 3)
        self.opacity_logits = np.array(opacity_logits, dtype=np.float64).reshape(n)
        if roi_logits is None:
            roi_logits = np.full(n, ROI_LOGIT_OFF)
        self.roi_logits = np.array(roi_logits, dtype=np.float64).reshape(n)
        self.background_color = np.array(background_color, dtype=np.float64).reshape(3)
        self.validate()

    def validate(self) -> None:
        for name in SCENE_ATTRIBUTES:
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"non-finite values in {name}")
        if not np.all(np.isfinite(self.background_color)):
            raise InvalidParameterError("non-finite background color")

    @classmethod
    def empty(cls, background_color: Sequence[float] = (0.0, 0.0, 0.0)) -> "GaussianScene":
        z = np.zeros((0, 3))
        return cls(z, z, np.zeros((0, 4)), z, np.zeros(0), np.zeros(0), background_color)

    @classmethod
    def from_gaussians(
        cls,
        gaussians: Iterable[Gaussian],
        background_color: Sequence[float] = (0.0, 0.0, 0.0),
    ) -> "GaussianScene":
        gs = list(gaussians)
        if not gs:
            return cls.empty(background_color)
        return cls(
            positions=np.stack([g.position for g in gs]),
            log_scales=np.stack([g.log_scale for g in gs]),
            rotations=np.stack([g.rotation for g in gs]),
            colors=np.stack([g.color for g in gs]),
            opacity_logits=np.array([g.opacity_logit for g in gs]),
            roi_logits=np.array([g.roi_logit for g in gs]),
            background_color=background_color,
        )

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def num_gaussians(self) -> int:
        return len(self)

    def __getitem__(self, index: int) -> Gaussian:
        return Gaussian(
            position=self.positions[index].copy(),
            log_scale=self.log_scales[index].copy(),
            rotation=self.rotations[index].copy(),
            color=self.colors[index].copy(),
            opacity_logit=float(self.opacity_logits[index]),
            roi_logit=float(self.roi_logits[index]),
        )

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @property
    def roi_values(self) -> np.ndarray:
        return sigmoid(self.roi_logits)

    def parameters(self) -> dict[str, np.ndarray]:
        """References (not copies) to the optimizable arrays, keyed by name."""
        return {name: getattr(self, name) for name in SCENE_ATTRIBUTES}

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            if name not in SCENE_ATTRIBUTES:
                raise ContractError(f"unknown scene attribute {name!r}")
            current = getattr(self, name)
            if value.shape != current.shape:
                raise ContractError(f"shape mismatch for {name}")
            setattr(self, name, np.asarray(value, dtype=np.float64))

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            self.positions.copy(),
            self.log_scales.copy(),
            self.rotations.copy(),
            self.colors.copy(),
            self.opacity_logits.copy(),
            self.roi_logits.copy(),
            self.background_color.copy(),
        )

    def allclose(self, other: "GaussianScene", atol: float = 0.0) -> bool:
        if len(self) != len(other):
            return False
        return all(
            np.allclose(getattr(self, n), getattr(other, n), rtol=0.0, atol=atol)
            for n in SCENE_ATTRIBUTES
        ) and np.allclose(self.background_color, other.background_color, rtol=0.0, atol=atol)

    def equals_exact(self, other: "GaussianScene") -> bool:
        """Bitwise equality on every stored field."""
        if len(self) != len(other):
            return False
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in SCENE_ATTRIBUTES
        ) and np.array_equal(self.background_color, other.background_color)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics in pixels plus a world-to-camera rigid pose.

    Points map as t = rotation @ p + translation with the camera looking
    along +z; a point is in front of the camera when t[2] > near_clip.
    Continuous image coordinates put the center of pixel (ix, iy) at
    (ix + 0.5, iy + 0.5).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray
    near_clip: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameterError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InvalidParameterError("image dimensions must be at least 1 pixel")
        R = self.rotation
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(self.translation)):
            raise InvalidParameterError("non-finite camera pose")
        if np.max(np.abs(R @ R.T - np.eye(3))) > 1e-4:
            raise InvalidParameterError("camera rotation is not orthonormal")
        if np.linalg.det(R) < 0.0:
            raise InvalidParameterError("camera rotation must be proper (det +1)")
        self.rotation.setflags(write=False)
        self.translation.setflags(write=False)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def scaled(self, factor: float) -> "Camera":
        """Camera with image dimensions and intrinsics scaled by ``factor``."""
        return Camera(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=max(1, int(round(self.width * factor))),
            height=max(1, int(round(self.height * factor))),
            rotation=self.rotation,
            translation=self.translation,
            near_clip=self.near_clip,
        )


class ImageBuffer:
    """A float image, row-major (height, width, channels), values in [0, 1]."""

    __slots__ = ("width", "height", "channels", "data")

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvalidParameterError("image data must be (H, W, 1) or (H, W, 3)")
        if not np.all(np.isfinite(data)):
            raise InvalidParameterError("image data must be finite")
        self.height, self.width, self.channels = data.shape
        self.data = data

    @classmethod
    def zeros(cls, width: int, height: int, channels: int = 3) -> "ImageBuffer":
        return cls(np.zeros((height, width, channels)))

    @classmethod
    def full(cls, width: int, height: int, value, channels: int = 3) -> "ImageBuffer":
        arr = np.empty((height, width, channels))
        arr[:] = value
        return cls(arr)

    def same_shape(self, other: "ImageBuffer") -> bool:
        return (self.width, self.height, self.channels) == (
            other.width,
            other.height,
            other.channels,
        )

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy())

    def clamped(self) -> "ImageBuffer":
        return ImageBuffer(np.clip(self.data, 0.0, 1.0))


@dataclass(frozen=True)
class Box3:
    """Axis-aligned 3D box given by min/max corners."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=np.float64).reshape(3))
        if not np.all(np.isfinite(self.min_corner)) or not np.all(np.isfinite(self.max_corner)):
            raise InvalidParameterError("box corners must be finite")
        if np.any(self.min_corner > self.max_corner):
            raise InvalidParameterError("box min corner must not exceed max corner")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict interior test, vectorized over (N, 3) points."""
        points = np.asarray(points, dtype=np.float64)
        return np.all((points > self.min_corner) & (points < self.max_corner), axis=-1)
