"""Scene description generation, instruction-target extraction, and mask
acquisition: the text-and-2D half of RoI alignment."""

from __future__ import annotations

import numpy as np

from ..clients.base import BackendError, ModelBackends, PromptSet
from ..core.types import Camera, ContractError, GaussianScene, ImageBuffer
from ..raster import render
from .types import SceneDescription


class ExtractionFailedError(BackendError):
    """The assistant produced an empty instruction-target phrase."""


def select_views(num_cameras: int, count: int, seed: int = 0) -> list[int]:
    """Uniform stratified view selection: one index from each of ``count``
    equal strata of the camera list, drawn with a seeded generator."""
    if count < 1:
        raise ContractError("must select at least one view")
    if count > num_cameras:
        raise ContractError(f"cannot select {count} views from {num_cameras} cameras")
    rng = np.random.default_rng(seed)
    edges = np.linspace(0, num_cameras, count + 1)
    picks = []
    for i in range(count):
        lo = int(np.floor(edges[i]))
        hi = max(int(np.floor(edges[i + 1])), lo + 1)
        picks.append(int(rng.integers(lo, min(hi, num_cameras))))
    return picks


def generate_description(
    scene: GaussianScene,
    cameras: list[Camera],
    num_views: int,
    backends: ModelBackends,
    prompts: PromptSet,
    seed: int = 0,
) -> SceneDescription:
    """Caption ``num_views`` stratified views and merge them into one
    scene description via the chat assistant."""
    views = select_views(len(cameras), num_views, seed)
    captions: list[tuple[int, str]] = []
    for view in views:
        try:
            caption = backends.captioner.caption(render(scene, cameras[view], "color"))
        except BackendError as exc:
            raise BackendError(f"caption failed for view {view}: {exc}") from exc
        captions.append((view, caption))

    if len(captions) == 1:
        user = f"View {captions[0][0]}: {captions[0][1]}"
    else:
        user = "\n".join(f"View {v}: {c}" for v, c in captions)
    merged = backends.assistant.chat(prompts.merge_prompt, user)
    return SceneDescription(per_view_captions=captions, merged=merged)


def extract_instruction_roi(
    description: str,
    instruction: str,
    backends: ModelBackends,
    prompts: PromptSet,
) -> str:
    """Ask the assistant which object the instruction targets.

    The user message is built by exact template substitution; an empty
    answer raises :class:`ExtractionFailedError` so callers can fall back
    to using the full instruction as the target phrase.
    """
    if not instruction.strip():
        raise ContractError("instruction must be non-empty")
    user = prompts.user_message(description, instruction)
    answer = backends.assistant.chat(prompts.extract_prompt, user).strip()
    if not answer:
        raise ExtractionFailedError(
            f"assistant returned no target phrase for {instruction!r}"
        )
    return answer


def acquire_masks(
    scene: GaussianScene,
    cameras: list[Camera],
    target_phrase: str,
    backends: ModelBackends,
    num_views: int,
    seed: int = 0,
) -> list[tuple[Camera, ImageBuffer]]:
    """Render stratified views and ground the target phrase in each.

    All-zero masks are kept (lifting tolerates them). Backend failures
    are collected and reported together with their view indices.
    """
    if num_views < 1:
        raise ContractError("mask acquisition needs at least one view")
    views = select_views(len(cameras), num_views, seed)
    results: list[tuple[Camera, ImageBuffer]] = []
    failures: list[str] = []
    for view in views:
        camera = cameras[view]
        try:
            image = render(scene, camera, "color")
            mask = backends.segmenter.segment(image, target_phrase)
        except BackendError as exc:
            failures.append(f"view {view}: {exc}")
            continue
        if (mask.height, mask.width) != (camera.height, camera.width):
            failures.append(f"view {view}: mask dims do not match the render")
            continue
        results.append((camera, mask))
    if failures:
        raise BackendError("mask acquisition failed for " + "; ".join(failures))
    return results
