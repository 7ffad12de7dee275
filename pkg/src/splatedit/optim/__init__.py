from .adam import AdamState, NonFiniteGradientError, adam_step
from .losses import LiftConfig, edit_loss, l1_loss, lift_loss
from .ssim import dssim_loss

__all__ = [
    "AdamState",
    "LiftConfig",
    "NonFiniteGradientError",
    "adam_step",
    "dssim_loss",
    "edit_loss",
    "l1_loss",
    "lift_loss",
]
