from .types import (
    Box3,
    Camera,
    ContractError,
    Gaussian,
    GaussianScene,
    ImageBuffer,
    InvalidParameterError,
    ROI_LOGIT_OFF,
    SCENE_ATTRIBUTES,
    covariance_from_params,
    logit,
    normalize_quaternion,
    quaternion_to_rotation,
    sigmoid,
)
from .ply import PlyParseError, PlySchemaError, export_ply, import_ply
from .cameras import CameraValidationError, dump_cameras, load_cameras

__all__ = [
    "Box3",
    "Camera",
    "CameraValidationError",
    "ContractError",
    "Gaussian",
    "GaussianScene",
    "ImageBuffer",
    "InvalidParameterError",
    "PlyParseError",
    "PlySchemaError",
    "ROI_LOGIT_OFF",
    "SCENE_ATTRIBUTES",
    "covariance_from_params",
    "dump_cameras",
    "export_ply",
    "import_ply",
    "load_cameras",
    "logit",
    "normalize_quaternion",
    "quaternion_to_rotation",
    "sigmoid",
]
