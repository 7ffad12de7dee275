"""The editing session: masked-gradient rounds over a frozen original.

A session owns a frozen copy of the input scene and a working copy being
edited. Each round renders the working scene from a sampled view, asks
the 2D editor for a target, takes the blended L1/D-SSIM loss, pushes the
gradient through the rasterizer, masks it to the RoI membership, and
applies one Adam step. Points outside the RoI receive exactly zero
gradient, zero optimizer moments, and zero update, so their stored bytes
never change.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..clients.base import BackendError, ModelBackends
from ..core.ply import export_ply, import_ply
from ..core.types import Camera, ContractError, GaussianScene, ImageBuffer
from ..optim.adam import AdamState, NonFiniteGradientError, adam_step
from ..optim.losses import edit_loss
from ..raster.backward import render_backward
from ..raster.render import render
from ..roi.types import GaussianRoi
from .config import EditConfig

STATUSES = ("idle", "lifting", "editing", "paused", "done", "failed")


@dataclass
class StepDiagnostics:
    round: int
    loss: float
    noise_level: float
    grad_norms: dict[str, float]


def _camera_key(camera: Camera) -> tuple:
    return (
        camera.fx, camera.fy, camera.cx, camera.cy, camera.width, camera.height,
        camera.rotation.tobytes(), camera.translation.tobytes(), camera.near_clip,
    )


class EditSession:
    """State machine for one instruction-driven edit."""

    def __init__(self, scene: GaussianScene, instruction: str, config: EditConfig):
        self.original_scene = scene.copy()
        self.working_scene = scene.copy()
        self.instruction = instruction
        self.config = config
        self.roi: GaussianRoi | None = None
        self.round = 0
        self.status = "idle"
        self.last_error: str | None = None
        self.loss_history: list[float] = []
        self.rng = np.random.default_rng(config.seed)
        self.adam: AdamState | None = None
        self.pause_requested = threading.Event()
        self._original_render_cache: dict[tuple, ImageBuffer] = {}

    # -- state transitions -------------------------------------------------

    def set_status(self, status: str) -> None:
        if status not in STATUSES:
            raise ContractError(f"unknown status {status!r}")
        self.status = status

    def begin_editing(self) -> None:
        if self.roi is None:
            raise ContractError("RoI must be lifted before editing starts")
        if self.status not in ("idle", "lifting", "editing", "paused"):
            raise ContractError(f"cannot start editing from status {self.status!r}")
        if self.adam is None:
            params = self._optimized_params()
            self.adam = AdamState.for_params(params, lr=1e-3)
        self.set_status("editing")

    def _optimized_params(self) -> dict[str, np.ndarray]:
        all_params = self.working_scene.parameters()
        return {k: all_params[k] for k in self.config.parameter_keys}

    def membership_mask(self) -> np.ndarray:
        if self.roi is None:
            return np.zeros(len(self.working_scene), dtype=bool)
        return self.roi.membership

    # -- rendering helpers ---------------------------------------------------

    def _effective_camera(self, camera: Camera) -> Camera:
        if camera.width > self.config.max_render_width:
            return camera.scaled(self.config.max_render_width / camera.width)
        return camera

    def original_render(self, camera: Camera) -> ImageBuffer:
        key = _camera_key(camera)
        if key not in self._original_render_cache:
            self._original_render_cache[key] = render(self.original_scene, camera, "color")
        return self._original_render_cache[key]


def edit_step(
    session: EditSession,
    camera: Camera,
    backends: ModelBackends,
    cfg: EditConfig | None = None,
) -> StepDiagnostics:
    """One editing round at the given view.

    Backend failures leave the session in ``editing`` with the round
    counter untouched; a non-finite loss or gradient fails the session.
    """
    cfg = cfg or session.config
    if session.status != "editing":
        raise ContractError(f"edit_step requires status 'editing', not {session.status!r}")

    camera = session._effective_camera(camera)
    rendered = render(session.working_scene, camera, "color")
    original = session.original_render(camera)
    noise_level = float(session.rng.uniform(cfg.t_min, cfg.t_max))

    edited = backends.editor.edit_image(rendered, original, session.instruction, noise_level)

    loss_value, loss_grad = edit_loss(rendered, edited, cfg.beta)
    if not np.isfinite(loss_value):
        session.set_status("failed")
        session.last_error = f"non-finite loss at round {session.round}"
        raise RuntimeError(session.last_error)

    grads = render_backward(session.working_scene, camera, "color", ImageBuffer(loss_grad))
    if cfg.mask_gradients:
        grads = grads.masked(session.membership_mask())

    grad_dict = grads.as_dict()
    step_grads = {k: grad_dict[k] for k in cfg.parameter_keys}
    try:
        new_params = adam_step(
            session._optimized_params(), step_grads, session.adam,
            lr_overrides=cfg.learning_rates,
        )
    except NonFiniteGradientError as exc:
        session.set_status("failed")
        session.last_error = str(exc)
        raise
    session.working_scene.set_parameters(new_params)
    _project_colors(session, cfg)

    session.round += 1
    session.loss_history.append(loss_value)
    return StepDiagnostics(
        round=session.round,
        loss=loss_value,
        noise_level=noise_level,
        grad_norms={k: float(np.linalg.norm(v)) for k, v in step_grads.items()},
    )


def _project_colors(session: EditSession, cfg: EditConfig) -> None:
    """Keep stored colors inside [0, 1] after an update.

    Partially covered pixels would otherwise drive colors arbitrarily far
    past the target (the compositing can only dim a color, so the
    unconstrained optimum may sit outside the box). Only rows the step
    could have touched are rewritten, preserving everyone else's bits.
    """
    if "colors" not in cfg.parameter_keys:
        return
    touched = session.membership_mask() if cfg.mask_gradients else slice(None)
    colors = session.working_scene.colors
    colors[touched] = np.clip(colors[touched], 0.0, 1.0)


def run_session(
    session: EditSession,
    cameras: list[Camera],
    backends: ModelBackends,
    cfg: EditConfig | None = None,
    on_round=None,
) -> GaussianScene:
    """Drive edit rounds until the budget, an early stop, or a pause.

    Views are sampled uniformly from the camera list with the session's
    seeded generator, so identical seeds and mocks give bit-identical
    results. ``on_round`` (if given) receives each StepDiagnostics.
    """
    cfg = cfg or session.config
    if not cameras:
        raise ContractError("run_session needs at least one camera")
    session.begin_editing()
    session.pause_requested.clear()

    while session.round < cfg.max_rounds:
        camera = cameras[int(session.rng.integers(len(cameras)))]
        diag = edit_step(session, camera, backends, cfg)
        if on_round is not None:
            on_round(diag)
        if session.pause_requested.is_set():
            session.set_status("paused")
            return session.working_scene
        if _should_stop_early(session.loss_history, cfg):
            break

    session.set_status("done")
    return session.working_scene


def _should_stop_early(history: list[float], cfg: EditConfig) -> bool:
    w = cfg.early_stop_window
    if w <= 0 or len(history) < 2 * w:
        return False
    recent = float(np.mean(history[-w:]))
    previous = float(np.mean(history[-2 * w : -w]))
    return (previous - recent) < cfg.early_stop_improvement


# -- checkpointing -----------------------------------------------------------


def save_checkpoint(session: EditSession, directory: str | Path) -> Path:
    """Write a resumable snapshot: scene PLYs plus a JSON state file.

    Double-precision PLYs and repr-exact JSON floats make resuming
    bit-identical to never having stopped.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "original.ply").write_bytes(export_ply(session.original_scene))
    (directory / "working.ply").write_bytes(export_ply(session.working_scene))

    state = {
        "instruction": session.instruction,
        "round": session.round,
        "status": session.status,
        "seed": session.config.seed,
        "config": session.config.to_json_dict(),
        "loss_history": session.loss_history,
        "rng_state": session.rng.bit_generator.state,
        "roi": None,
        "adam": None,
        "last_error": session.last_error,
        # Colors ride along exactly: the PLY stores them as DC
        # coefficients, whose grid cannot represent every float64 color.
        "working_colors": session.working_scene.colors.tolist(),
        "original_colors": session.original_scene.colors.tolist(),
    }
    if session.roi is not None:
        state["roi"] = {
            "membership": session.roi.membership.astype(int).tolist(),
            "soft": session.roi.soft.tolist(),
        }
    if session.adam is not None:
        state["adam"] = {
            "step_count": session.adam.step_count,
            "lr": session.adam.lr,
            "beta1": session.adam.beta1,
            "beta2": session.adam.beta2,
            "eps": session.adam.eps,
            "first_moment": {k: v.tolist() for k, v in session.adam.first_moment.items()},
            "second_moment": {k: v.tolist() for k, v in session.adam.second_moment.items()},
        }
    (directory / "state.json").write_text(json.dumps(state))
    return directory


def load_checkpoint(directory: str | Path) -> EditSession:
    directory = Path(directory)
    state = json.loads((directory / "state.json").read_text())
    config = EditConfig.from_json_dict(state["config"])

    session = EditSession(GaussianScene.empty(), state["instruction"], config)
    session.original_scene = import_ply((directory / "original.ply").read_bytes())
    session.working_scene = import_ply((directory / "working.ply").read_bytes())
    if "working_colors" in state:
        session.working_scene.colors[:] = np.asarray(state["working_colors"])
        session.original_scene.colors[:] = np.asarray(state["original_colors"])
    session.round = state["round"]
    session.status = state["status"]
    session.last_error = state.get("last_error")
    session.loss_history = list(state["loss_history"])
    session.rng.bit_generator.state = state["rng_state"]
    if state["roi"] is not None:
        session.roi = GaussianRoi(
            membership=np.asarray(state["roi"]["membership"], dtype=bool),
            soft=np.asarray(state["roi"]["soft"]),
        )
    if state["adam"] is not None:
        a = state["adam"]
        session.adam = AdamState(
            first_moment={k: np.asarray(v) for k, v in a["first_moment"].items()},
            second_moment={k: np.asarray(v) for k, v in a["second_moment"].items()},
            step_count=a["step_count"],
            lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"],
        )
    return session
