from .base import (
    BackendConfig,
    BackendContractError,
    BackendError,
    BackendRequestError,
    FixtureMissingError,
    ModelBackends,
    PromptSet,
)
from .http import make_http_backends
from .mock import (
    MockCaptioner,
    MockChatAssistant,
    MockRecolorEditor,
    MockSegmenter,
    color_region_mask,
    extract_target_phrase,
    image_key,
    make_mock_backends,
)

__all__ = [
    "BackendConfig",
    "BackendContractError",
    "BackendError",
    "BackendRequestError",
    "FixtureMissingError",
    "MockCaptioner",
    "MockChatAssistant",
    "MockRecolorEditor",
    "MockSegmenter",
    "ModelBackends",
    "PromptSet",
    "color_region_mask",
    "extract_target_phrase",
    "image_key",
    "make_http_backends",
    "make_mock_backends",
]
