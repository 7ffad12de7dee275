from .combine import combine_roi
from .describe import (
    ExtractionFailedError,
    acquire_masks,
    extract_instruction_roi,
    generate_description,
    select_views,
)
from .lift import RoiCompositeCache, lift_roi
from .types import GaussianRoi, RoiModification, SceneDescription

__all__ = [
    "ExtractionFailedError",
    "GaussianRoi",
    "RoiCompositeCache",
    "RoiModification",
    "SceneDescription",
    "acquire_masks",
    "combine_roi",
    "extract_instruction_roi",
    "generate_description",
    "lift_roi",
    "select_views",
]
