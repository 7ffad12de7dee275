from .projection import COV2D_DILATION, ProjectedScene, Splat2D, project
from .render import PICK_THRESHOLD, pick, render
from .backward import GradientBuffer, render_backward
from .png import decode_png, encode_png

__all__ = [
    "COV2D_DILATION",
    "GradientBuffer",
    "PICK_THRESHOLD",
    "ProjectedScene",
    "Splat2D",
    "decode_png",
    "encode_png",
    "pick",
    "project",
    "render",
    "render_backward",
]
