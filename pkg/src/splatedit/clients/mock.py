"""Deterministic fixture mocks for the four model backends.

Every mock is a pure function of its inputs: fixture tables key on exact
content (image hashes, prompt/user strings) and the procedural fallbacks
use only fixed rule tables and image arithmetic. That determinism is
what makes end-to-end editing tests reproducible bit for bit.

The procedural behaviors are desk-scale stand-ins for the real models:

* captioner  - names the colored point clusters it sees and where;
* assistant  - merges view captions, or extracts the object phrase an
  edit instruction targets (resolving "the thing next to the X" against
  the scene description);
* segmenter  - grounds a color word in the phrase to a pixel mask;
* editor     - recolors the region named by the instruction toward the
  target color, leaving the rest of the frame untouched.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np

from ..core.types import ImageBuffer
from ..raster.png import encode_png
from .base import FixtureMissingError, BackendError, ModelBackends

COLOR_WORDS: dict[str, tuple[float, float, float]] = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "orange": (1.0, 0.55, 0.0),
    "purple": (0.6, 0.0, 0.8),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
}

STOP_WORDS = {
    "the", "a", "an", "its", "his", "her", "their", "him", "her", "them", "it",
    "this", "that", "please", "completely", "totally", "very", "into", "to",
}
VERBS = {"turn", "make", "give", "change", "paint", "color", "set", "edit", "recolor"}


def image_key(image: ImageBuffer) -> str:
    """Stable content hash of an image (over its canonical PNG bytes)."""
    return hashlib.sha256(encode_png(image)).hexdigest()


def _prompt_key(system_prompt: str) -> str:
    return hashlib.sha256(system_prompt.encode("utf-8")).hexdigest()


def color_region_mask(image: ImageBuffer, color_word: str,
                      min_brightness: float = 0.22,
                      hue_tolerance: float = 0.35) -> np.ndarray:
    """Boolean (H, W) mask of pixels whose hue matches a named color.

    Pixels are compared after normalizing away brightness, so partially
    transparent splats over a dark background still match their color.
    """
    target = np.asarray(COLOR_WORDS[color_word])
    rgb = image.data if image.channels == 3 else np.repeat(image.data, 3, axis=2)
    brightness = rgb.max(axis=2)
    lit = brightness > min_brightness
    normalized = rgb / np.maximum(brightness, 1e-9)[:, :, None]
    target_n = target / max(target.max(), 1e-9)
    close = np.abs(normalized - target_n).max(axis=2) < hue_tolerance
    return lit & close


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


class MockCaptioner:
    def __init__(self, table: dict[str, str] | None = None, procedural: bool = True):
        self.table = dict(table or {})
        self.procedural = procedural

    def caption(self, image: ImageBuffer) -> str:
        if image.width == 0 or image.height == 0:
            raise BackendError("cannot caption an empty image")
        key = image_key(image)
        if key in self.table:
            return self.table[key]
        if self.procedural:
            return self._describe(image)
        raise FixtureMissingError(f"no caption fixture for image {key[:12]}")

    def _describe(self, image: ImageBuffer) -> str:
        parts = []
        for word in COLOR_WORDS:
            mask = color_region_mask(image, word)
            if mask.mean() < 0.002:
                continue
            xs = np.nonzero(mask)[1]
            center = xs.mean() / image.width
            side = "left" if center < 0.4 else "right" if center > 0.6 else "middle"
            parts.append(f"a {word} cluster on the {side}")
        if not parts:
            return "an empty dark scene"
        if len(parts) == 1:
            return f"{parts[0]} of the frame"
        return " and ".join(parts) + " of the frame, next to each other"


class MockChatAssistant:
    """Fixture table keyed on (system prompt hash, user message), with
    procedural merge/extract fallbacks."""

    def __init__(self, table: dict[tuple[str, str], str] | None = None,
                 procedural: bool = True):
        self.table = dict(table or {})
        self.procedural = procedural

    def chat(self, system_prompt: str, user_message: str) -> str:
        key = (_prompt_key(system_prompt), user_message)
        if key in self.table:
            return self.table[key]
        if not self.procedural:
            raise FixtureMissingError("no chat fixture for this prompt/message pair")
        if "Edit Instruction:" in user_message:
            return self._extract(user_message)
        if user_message.lstrip().startswith("View "):
            return self._merge(user_message)
        raise FixtureMissingError("mock assistant cannot interpret this message")

    @staticmethod
    def _merge(user_message: str) -> str:
        captions = []
        for line in user_message.splitlines():
            m = re.match(r"View \d+: (.*)", line.strip())
            if m and m.group(1) not in captions:
                captions.append(m.group(1))
        return "The scene shows " + "; ".join(captions) + "."

    def _extract(self, user_message: str) -> str:
        desc_match = re.search(r"Text description:(.*?)Edit Instruction:", user_message, re.S)
        instr_match = re.search(r"Edit Instruction:(.*?)(?:Answer:|$)", user_message, re.S)
        description = desc_match.group(1).strip() if desc_match else ""
        instruction = instr_match.group(1).strip() if instr_match else ""
        return extract_target_phrase(description, instruction)


def extract_target_phrase(description: str, instruction: str) -> str:
    """Rule-based stand-in for LLM instruction-target extraction."""
    tokens = _tokenize(instruction)
    if not tokens:
        return ""

    # "the thing next to the X" resolves against "A next to B" in the description.
    ref = re.search(r"thing (?:next to|near|beside) (?:the |a |an )?(\w+)", instruction.lower())
    if ref:
        anchor = ref.group(1)
        resolved = _resolve_adjacency(description, anchor)
        if resolved:
            return resolved

    if tokens[0] == "give":
        # "give him a red nose": the trailing noun names the target; the
        # adjectives describe the attribute being given.
        content = [t for t in tokens[1:] if t not in STOP_WORDS and t not in COLOR_WORDS]
        return content[-1] if content else ""

    if tokens[0] in VERBS:
        # "turn the red cluster blue": object phrase sits between the verb
        # and the trailing target color; identifying colors stay attached.
        body = tokens[1:]
        if body and body[-1] in COLOR_WORDS:
            body = body[:-1]
        phrase = [t for t in body if t not in STOP_WORDS]
        if phrase:
            return " ".join(phrase)

    content = [t for t in tokens if t not in STOP_WORDS and t not in VERBS and t not in COLOR_WORDS]
    return content[-1] if content else ""


_NOUN_ALIASES = {
    "bike": "bicycle",
    "cycle": "bicycle",
    "auto": "car",
}


def _same_noun(a: str, b: str) -> bool:
    a, b = a.rstrip("s"), b.rstrip("s")
    return a == b or _NOUN_ALIASES.get(a, a) == _NOUN_ALIASES.get(b, b)


def _resolve_adjacency(description: str, anchor: str) -> str | None:
    """Find the noun adjacent to ``anchor`` in "A next to B" style text."""
    for a, b in re.findall(
        r"(?:a |an |the )?(\w+) (?:next to|near|beside) (?:a |an |the )?(\w+)",
        description.lower(),
    ):
        if _same_noun(anchor, b):
            return a
        if _same_noun(anchor, a):
            return b
    # Also accept "a bench and a bicycle ... next to each other".
    if "next to each other" in description.lower() or "adjacent" in description.lower():
        nouns = [t for t in _tokenize(description)
                 if t not in STOP_WORDS and t not in COLOR_WORDS
                 and t not in {"and", "of", "on", "frame", "scene", "next", "other", "each"}]
        candidates = [n for n in nouns if n != anchor and anchor not in (n, n + "s")]
        if candidates:
            return candidates[0]
    return None


class MockSegmenter:
    """Grounds a color word in the phrase against the image itself."""

    def __init__(self, table: dict[tuple[str, str], np.ndarray] | None = None,
                 procedural: bool = True):
        self.table = dict(table or {})
        self.procedural = procedural

    def segment(self, image: ImageBuffer, phrase: str) -> ImageBuffer:
        key = (image_key(image), phrase)
        if key in self.table:
            return ImageBuffer(self.table[key].astype(np.float64))
        if not self.procedural:
            raise FixtureMissingError(f"no segmentation fixture for phrase {phrase!r}")
        mask = np.zeros((image.height, image.width, 1))
        for word in _tokenize(phrase):
            if word in COLOR_WORDS:
                mask[:, :, 0] = color_region_mask(image, word).astype(np.float64)
                break
        # No groundable word: the all-zero "not found" mask is legal.
        return ImageBuffer(mask)


_RGB_TUPLE = re.compile(r"\(\s*([\d.]+)\s*,\s*([\d.]+)\s*,\s*([\d.]+)\s*\)")


class MockRecolorEditor:
    """Recolor editor: output = m * (0.8 * target + 0.2 * rendered) + (1 - m) * rendered.

    The region mask m comes from grounding the instruction's source color
    on the *original* image, so the region stays put while the edit
    progresses. The noise level is accepted and ignored.
    """

    blend_target = 0.8

    def edit_image(self, rendered: ImageBuffer, original: ImageBuffer,
                   instruction: str, noise_level: float) -> ImageBuffer:
        if not (0.0 <= noise_level <= 1.0):
            raise BackendError(f"noise level {noise_level} outside [0, 1]")
        if not rendered.same_shape(original):
            raise BackendError("rendered and original image dims differ")
        if instruction.strip() == "":
            return rendered.copy()

        source, target = self._parse(instruction)
        mask = color_region_mask(original, source).astype(np.float64)[:, :, None]
        blend = self.blend_target * np.asarray(target) + (1.0 - self.blend_target) * rendered.data
        out = mask * blend + (1.0 - mask) * rendered.data
        return ImageBuffer(np.clip(out, 0.0, 1.0))

    @staticmethod
    def _parse(instruction: str) -> tuple[str, tuple[float, float, float]]:
        tokens = _tokenize(re.sub(_RGB_TUPLE, " ", instruction))
        colors = [t for t in tokens if t in COLOR_WORDS]
        tuple_match = _RGB_TUPLE.search(instruction)
        if tuple_match:
            target = tuple(float(g) for g in tuple_match.groups())
            if not colors:
                raise BackendError(
                    f"mock editor needs a source color word in {instruction!r}"
                )
            return colors[0], target
        if len(colors) >= 2:
            return colors[0], COLOR_WORDS[colors[-1]]
        raise BackendError(
            f"mock editor cannot parse a source and target color from {instruction!r}"
        )


def make_mock_backends(fixture_dir: str | Path | None = None,
                       procedural: bool = True) -> ModelBackends:
    """Assemble mock backends, optionally preloading fixture tables.

    The fixture directory may contain ``captions.json`` (image id to
    caption, with matching ``images/<id>.png``) and ``chat.json`` (a list
    of {system, user, answer} records).
    """
    caption_table: dict[str, str] = {}
    chat_table: dict[tuple[str, str], str] = {}
    if fixture_dir is not None:
        root = Path(fixture_dir)
        captions_file = root / "captions.json"
        if captions_file.exists():
            by_id = json.loads(captions_file.read_text())
            for image_id, caption in by_id.items():
                png = root / "images" / f"{image_id}.png"
                if png.exists():
                    caption_table[hashlib.sha256(png.read_bytes()).hexdigest()] = caption
        chat_file = root / "chat.json"
        if chat_file.exists():
            for record in json.loads(chat_file.read_text()):
                chat_table[(_prompt_key(record["system"]), record["user"])] = record["answer"]
    return ModelBackends(
        captioner=MockCaptioner(caption_table, procedural=procedural),
        assistant=MockChatAssistant(chat_table, procedural=procedural),
        segmenter=MockSegmenter(procedural=procedural),
        editor=MockRecolorEditor(),
    )
