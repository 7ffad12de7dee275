"""RoI domain types: per-point membership and user modifications."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.types import Box3, ContractError, GaussianScene


@dataclass
class SceneDescription:
    """Per-view captions plus their merged scene description."""

    per_view_captions: list[tuple[int, str]]
    merged: str

    def __post_init__(self):
        if not self.per_view_captions:
            raise ContractError("a scene description needs at least one view caption")
        if not self.merged.strip():
            raise ContractError("merged description must be non-empty")


@dataclass
class GaussianRoi:
    """Thresholded RoI membership plus the underlying soft attribute."""

    membership: np.ndarray
    soft: np.ndarray

    def __post_init__(self):
        self.membership = np.asarray(self.membership, dtype=bool).reshape(-1)
        self.soft = np.asarray(self.soft, dtype=np.float64).reshape(-1)
        if self.membership.shape != self.soft.shape:
            raise ContractError("membership and soft arrays must have equal length")

    @classmethod
    def from_scene(cls, scene: GaussianScene, threshold: float) -> "GaussianRoi":
        soft = scene.roi_values
        return cls(membership=soft >= threshold, soft=soft)

    @classmethod
    def empty(cls, n: int) -> "GaussianRoi":
        return cls(membership=np.zeros(n, dtype=bool), soft=np.zeros(n))

    def indices(self) -> np.ndarray:
        return np.nonzero(self.membership)[0]

    def copy(self) -> "GaussianRoi":
        return GaussianRoi(self.membership.copy(), self.soft.copy())


@dataclass
class RoiModification:
    """User adjustments: points to force in, points to force out, and an
    optional bounding box that everything must stay inside."""

    add_indices: frozenset[int] = field(default_factory=frozenset)
    del_indices: frozenset[int] = field(default_factory=frozenset)
    box: Box3 | None = None

    def __post_init__(self):
        object.__setattr__(self, "add_indices", frozenset(int(i) for i in self.add_indices))
        object.__setattr__(self, "del_indices", frozenset(int(i) for i in self.del_indices))
        overlap = self.add_indices & self.del_indices
        if overlap:
            raise ContractError(f"add and del sets overlap: {sorted(overlap)}")

    @property
    def is_empty(self) -> bool:
        return not self.add_indices and not self.del_indices and self.box is None

    @classmethod
    def from_json_dict(cls, payload: dict) -> "RoiModification":
        box = None
        if payload.get("box") is not None:
            box = Box3(payload["box"]["min"], payload["box"]["max"])
        return cls(
            add_indices=frozenset(payload.get("add", [])),
            del_indices=frozenset(payload.get("del", [])),
            box=box,
        )

    def to_json_dict(self) -> dict:
        return {
            "add": sorted(self.add_indices),
            "del": sorted(self.del_indices),
            "box": None
            if self.box is None
            else {
                "min": [float(v) for v in self.box.min_corner],
                "max": [float(v) for v in self.box.max_corner],
            },
        }
