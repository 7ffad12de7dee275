"""splatedit: interactive region-of-interest editing for Gaussian splat scenes."""

__version__ = "0.1.0"

from .core import (
    Box3,
    Camera,
    Gaussian,
    GaussianScene,
    ImageBuffer,
    export_ply,
    import_ply,
    load_cameras,
)
from .raster import pick, render, render_backward

__all__ = [
    "Box3",
    "Camera",
    "Gaussian",
    "GaussianScene",
    "ImageBuffer",
    "__version__",
    "export_ply",
    "import_ply",
    "load_cameras",
    "pick",
    "render",
    "render_backward",
]
