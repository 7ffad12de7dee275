"""Editing configuration: loss blend, round budget, learning rates."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core.types import ContractError

# User-facing attribute names mapped onto scene parameter arrays.
ATTRIBUTE_KEYS = {
    "position": "positions",
    "scale": "log_scales",
    "rotation": "rotations",
    "color": "colors",
    "opacity": "opacity_logits",
}

DEFAULT_LEARNING_RATES = {
    "positions": 1.6e-4,
    "log_scales": 5e-3,
    "rotations": 1e-3,
    "colors": 2.5e-2,
    "opacity_logits": 5e-2,
}


@dataclass
class EditConfig:
    """Knobs of the masked-gradient editing loop.

    ``attributes_to_optimize`` picks which parameter groups move (the
    default appearance set suits recolor-style edits; add geometry
    attributes for shape edits). ``mask_gradients=False`` reproduces the
    no-RoI ablation where edits leak outside the target.
    """

    beta: float = 0.2
    max_rounds: int = 200
    t_min: float = 0.02
    t_max: float = 0.98
    learning_rates: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_LEARNING_RATES)
    )
    seed: int = 0
    attributes_to_optimize: frozenset[str] = frozenset({"color", "opacity"})
    mask_gradients: bool = True
    early_stop_window: int = 20
    early_stop_improvement: float = 1e-5
    max_render_width: int = 512

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ContractError("beta must lie in [0, 1]")
        if self.max_rounds < 1:
            raise ContractError("max_rounds must be at least 1")
        if not (0.0 <= self.t_min <= self.t_max <= 1.0):
            raise ContractError("noise range must satisfy 0 <= t_min <= t_max <= 1")
        self.attributes_to_optimize = frozenset(self.attributes_to_optimize)
        unknown = self.attributes_to_optimize - set(ATTRIBUTE_KEYS)
        if unknown:
            raise ContractError(f"unknown attributes {sorted(unknown)}")
        if not self.attributes_to_optimize:
            raise ContractError("at least one attribute must be optimized")
        if self.max_render_width < 16:
            raise ContractError("max_render_width must be at least 16")

    @property
    def parameter_keys(self) -> list[str]:
        return sorted(ATTRIBUTE_KEYS[a] for a in self.attributes_to_optimize)

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "max_rounds": self.max_rounds,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "learning_rates": dict(self.learning_rates),
            "seed": self.seed,
            "attributes_to_optimize": sorted(self.attributes_to_optimize),
            "mask_gradients": self.mask_gradients,
            "early_stop_window": self.early_stop_window,
            "early_stop_improvement": self.early_stop_improvement,
            "max_render_width": self.max_render_width,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "EditConfig":
        payload = dict(payload)
        if "attributes_to_optimize" in payload:
            payload["attributes_to_optimize"] = frozenset(payload["attributes_to_optimize"])
        return cls(**payload)
