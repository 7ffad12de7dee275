"""HTTP adapters speaking the JSON wire protocol.

Endpoints (relative to the configured base URL):

    POST /caption  {image_png_b64}                          -> {text}
    POST /chat     {system, user}                           -> {text}
    POST /segment  {image_png_b64, phrase}                  -> {mask_png_b64}
    POST /edit     {image_png_b64, original_png_b64,
                    instruction, noise_level,
                    image_guidance, text_guidance}          -> {image_png_b64}

Requests retry on transport errors and 5xx responses up to the
configured count. Responses are validated against the output contracts
(dimensions, ranges) before anything reaches the numerics.
"""

from __future__ import annotations

import base64

import httpx
import numpy as np

from ..core.types import ImageBuffer
from ..raster.png import decode_png, encode_png
from .base import (
    BackendConfig,
    BackendContractError,
    BackendRequestError,
    ModelBackends,
)


def _b64(image: ImageBuffer) -> str:
    return base64.b64encode(encode_png(image)).decode("ascii")


def _from_b64(data: str) -> ImageBuffer:
    return decode_png(base64.b64decode(data))


class HttpClientBase:
    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(
            base_url=config.endpoint,
            timeout=config.timeout,
            transport=transport,
        )

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendRequestError(
                    f"{path} returned {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise BackendRequestError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
            return response.json()
        raise BackendRequestError(f"{path} failed after retries: {last_error}")

    def close(self) -> None:
        self._client.close()


class HttpCaptioner(HttpClientBase):
    def caption(self, image: ImageBuffer) -> str:
        body = self._post("/caption", {"image_png_b64": _b64(image)})
        text = body.get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise BackendContractError("caption backend returned an empty caption")
        return text


class HttpChatAssistant(HttpClientBase):
    def chat(self, system_prompt: str, user_message: str) -> str:
        body = self._post("/chat", {"system": system_prompt, "user": user_message})
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendContractError("chat backend returned no text")
        return text


class HttpSegmenter(HttpClientBase):
    def segment(self, image: ImageBuffer, phrase: str) -> ImageBuffer:
        body = self._post("/segment", {"image_png_b64": _b64(image), "phrase": phrase})
        mask = _from_b64(body["mask_png_b64"])
        if (mask.height, mask.width) != (image.height, image.width):
            raise BackendContractError(
                f"mask dims {(mask.height, mask.width)} do not match image "
                f"{(image.height, image.width)}"
            )
        data = mask.data.mean(axis=2, keepdims=True) if mask.channels == 3 else mask.data
        return ImageBuffer(np.clip(data, 0.0, 1.0))


class HttpImageEditor(HttpClientBase):
    def edit_image(self, rendered: ImageBuffer, original: ImageBuffer,
                   instruction: str, noise_level: float) -> ImageBuffer:
        payload = {
            "image_png_b64": _b64(rendered),
            "original_png_b64": _b64(original),
            "instruction": instruction,
            "noise_level": noise_level,
            "image_guidance": self.config.image_guidance,
            "text_guidance": self.config.text_guidance,
        }
        body = self._post("/edit", payload)
        edited = _from_b64(body["image_png_b64"])
        if (edited.height, edited.width, edited.channels) != (
            rendered.height, rendered.width, rendered.channels
        ):
            raise BackendContractError("edited image dims do not match the input")
        return ImageBuffer(np.clip(edited.data, 0.0, 1.0))


def make_http_backends(config: BackendConfig,
                       transport: httpx.BaseTransport | None = None) -> ModelBackends:
    return ModelBackends(
        captioner=HttpCaptioner(config, transport),
        assistant=HttpChatAssistant(config, transport),
        segmenter=HttpSegmenter(config, transport),
        editor=HttpImageEditor(config, transport),
    )
