"""Client interfaces for the four external models.

The engine only ever sees these narrow surfaces: a captioner, a chat
assistant, a grounding segmenter, and a 2D image editor. Each has an
HTTP adapter and a deterministic mock; adapters are responsible for
enforcing output contracts (dimensions, value ranges) no matter what the
backend returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from ..core.types import ContractError, ImageBuffer

DEFAULT_CAPTION_PROMPT = "What is the content of the image"
DEFAULT_MERGE_PROMPT = (
    "You merge several single-view image descriptions of one scene into a "
    "single detailed scene description. Mention every object and the "
    "spatial relations between them."
)
DEFAULT_EXTRACT_PROMPT = (
    "Given a scene description and an edit instruction, answer with only "
    "the short phrase naming the object to edit."
)
DEFAULT_TEMPLATE = "Text description: {description} Edit Instruction: {instruction} Answer:"


class BackendError(RuntimeError):
    """Base class for model-backend failures."""


class BackendRequestError(BackendError):
    """An HTTP backend failed after exhausting its retry budget."""


class BackendContractError(BackendError):
    """A backend returned data violating the adapter's output contract."""


class FixtureMissingError(BackendError):
    """A mock received an input with no fixture entry and no fallback."""


@dataclass
class PromptSet:
    """Prompt texts and the user-message template for RoI extraction.

    The template must contain the {description} and {instruction} slots
    exactly once each.
    """

    caption_prompt: str = DEFAULT_CAPTION_PROMPT
    merge_prompt: str = DEFAULT_MERGE_PROMPT
    extract_prompt: str = DEFAULT_EXTRACT_PROMPT
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        for slot in ("{description}", "{instruction}"):
            if self.template.count(slot) != 1:
                raise ContractError(f"template must contain {slot} exactly once")

    def user_message(self, description: str, instruction: str) -> str:
        return self.template.format(description=description, instruction=instruction)


@dataclass
class BackendConfig:
    """Connection and guidance settings for one backend."""

    endpoint: str = ""
    timeout: float = 30.0
    retries: int = 1
    mode: str = "mock"
    fixture_path: str | None = None
    image_guidance: float | None = None
    text_guidance: float | None = None

    def __post_init__(self):
        if self.mode not in ("http", "mock"):
            raise ContractError("backend mode must be 'http' or 'mock'")
        if self.image_guidance is not None and not (1.0 <= self.image_guidance <= 2.0):
            raise ContractError("image guidance must lie in [1.0, 2.0]")
        if self.text_guidance is not None and not (5.0 <= self.text_guidance <= 15.0):
            raise ContractError("text guidance must lie in [5.0, 15.0]")


class Captioner(Protocol):
    def caption(self, image: ImageBuffer) -> str: ...


class ChatAssistant(Protocol):
    def chat(self, system_prompt: str, user_message: str) -> str: ...


class GroundingSegmenter(Protocol):
    def segment(self, image: ImageBuffer, phrase: str) -> ImageBuffer: ...


class ImageEditor(Protocol):
    def edit_image(self, rendered: ImageBuffer, original: ImageBuffer,
                   instruction: str, noise_level: float) -> ImageBuffer: ...


@dataclass
class ModelBackends:
    """The four model clients the pipeline consumes."""

    captioner: Captioner
    assistant: ChatAssistant
    segmenter: GroundingSegmenter
    editor: ImageEditor
