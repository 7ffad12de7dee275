import base64
import json

import httpx
import numpy as np
import pytest

from splatedit.clients import (
    BackendConfig,
    BackendContractError,
    BackendError,
    BackendRequestError,
    FixtureMissingError,
    MockCaptioner,
    MockChatAssistant,
    MockRecolorEditor,
    MockSegmenter,
    PromptSet,
    color_region_mask,
    extract_target_phrase,
    image_key,
    make_http_backends,
    make_mock_backends,
)
from splatedit.core.types import ContractError, ImageBuffer
from splatedit.raster import render
from splatedit.raster.png import decode_png, encode_png
from splatedit.synthetic import make_two_cluster_scene, orbit_cameras


def solid(color, w=16, h=16):
    arr = np.zeros((h, w, 3))
    arr[:] = color
    return ImageBuffer(arr)


def red_square_on_black(w=20, h=20):
    arr = np.zeros((h, w, 3))
    arr[4:10, 3:9] = [0.8, 0.04, 0.04]
    return ImageBuffer(arr)


class TestPromptSet:
    def test_defaults_valid(self):
        prompts = PromptSet()
        msg = prompts.user_message("a scene", "do a thing")
        assert "Text description: a scene" in msg
        assert "Edit Instruction: do a thing" in msg
        assert msg.rstrip().endswith("Answer:")

    def test_template_slots_enforced(self):
        with pytest.raises(ContractError):
            PromptSet(template="only {description} here")
        with pytest.raises(ContractError):
            PromptSet(template="{description} {instruction} {instruction}")


class TestBackendConfig:
    def test_guidance_envelopes(self):
        BackendConfig(image_guidance=1.4, text_guidance=7.5)
        with pytest.raises(ContractError):
            BackendConfig(image_guidance=2.5)
        with pytest.raises(ContractError):
            BackendConfig(text_guidance=4.0)

    def test_mode_validation(self):
        with pytest.raises(ContractError):
            BackendConfig(mode="grpc")


class TestMockCaptioner:
    def test_fixture_echo_by_image_identity(self):
        bench_view = red_square_on_black()
        table = {image_key(bench_view): "a bench next to a bicycle in a park"}
        captioner = MockCaptioner(table, procedural=False)
        assert captioner.caption(bench_view) == "a bench next to a bicycle in a park"

    def test_fixture_miss_raises(self):
        captioner = MockCaptioner({}, procedural=False)
        with pytest.raises(FixtureMissingError):
            captioner.caption(solid((0.5, 0.5, 0.5)))

    def test_empty_image_rejected(self):
        captioner = MockCaptioner()
        with pytest.raises(BackendError):
            captioner.caption(ImageBuffer(np.zeros((0, 0, 3))))

    def test_procedural_names_cluster_colors(self):
        scene = make_two_cluster_scene()
        cam = orbit_cameras(6)[0]
        caption = MockCaptioner().caption(render(scene, cam, "color"))
        assert "red cluster" in caption
        assert "blue cluster" in caption

    def test_pure_function_of_input(self):
        img = red_square_on_black()
        captioner = MockCaptioner()
        assert captioner.caption(img) == captioner.caption(img.copy())


class TestTargetExtraction:
    def test_adjacency_resolution(self):
        description = "a park with a bench next to a bicycle on a sunny day"
        assert extract_target_phrase(description, "Turn the thing next to the bike orange") == "bench"

    def test_give_pattern_drops_attribute_color(self):
        assert extract_target_phrase("a photo of a man", "Give him a red nose") == "nose"

    def test_turn_pattern_keeps_identifying_color(self):
        assert extract_target_phrase("two clusters", "Turn the red cluster blue") == "red cluster"

    def test_possessive_object(self):
        assert extract_target_phrase("a toy doll", "Turn its mouth red") == "mouth"

    def test_direct_noun_echo_without_description(self):
        assert extract_target_phrase("", "make the hat blue") == "hat"

    def test_empty_instruction_gives_empty_answer(self):
        assert extract_target_phrase("anything", "") == ""


class TestMockChat:
    def test_table_keyed_on_prompt_hash_and_user(self):
        assistant = MockChatAssistant(procedural=False)
        prompts = PromptSet()
        user = prompts.user_message("a bench next to a bike", "paint the bench orange")
        import hashlib
        key = (hashlib.sha256(prompts.extract_prompt.encode()).hexdigest(), user)
        assistant.table[key] = "bench"
        assert assistant.chat(prompts.extract_prompt, user) == "bench"
        with pytest.raises(FixtureMissingError):
            assistant.chat("different prompt", user)

    def test_procedural_merge_joins_unique_views(self):
        assistant = MockChatAssistant()
        merged = assistant.chat(
            "merge", "View 0: a red cluster\nView 1: a blue cluster\nView 2: a red cluster"
        )
        assert "red cluster" in merged and "blue cluster" in merged
        assert merged.count("red cluster") == 1

    def test_procedural_extract_via_template(self):
        prompts = PromptSet()
        user = prompts.user_message(
            "a red cluster on the left and a blue cluster on the right", "Turn the red cluster blue"
        )
        assert MockChatAssistant().chat(prompts.extract_prompt, user) == "red cluster"


class TestMockSegmenter:
    def test_grounds_color_word_to_region(self):
        img = red_square_on_black()
        mask = MockSegmenter().segment(img, "red cluster")
        expected = np.zeros((20, 20))
        expected[4:10, 3:9] = 1.0
        np.testing.assert_array_equal(mask.data[:, :, 0], expected)

    def test_unknown_phrase_gives_zero_mask(self):
        mask = MockSegmenter().segment(red_square_on_black(), "the gearbox")
        np.testing.assert_array_equal(mask.data, 0.0)

    def test_mask_dims_match_image(self):
        img = ImageBuffer(np.zeros((11, 17, 3)))
        mask = MockSegmenter().segment(img, "red thing")
        assert (mask.height, mask.width, mask.channels) == (11, 17, 1)

    def test_cluster_scene_masks_cover_red_projection(self):
        # Oracle: the red cluster's own projected coverage from the scene's
        # known ground-truth membership.
        scene = make_two_cluster_scene()
        red_only = scene.copy()
        red_only.opacity_logits[50:] = -40.0  # hide the blue cluster
        for cam in orbit_cameras(4):
            img = render(scene, cam, "color")
            mask = MockSegmenter().segment(img, "red cluster").data[:, :, 0]
            red_cov = render(red_only, cam, "color").data.max(axis=2)
            strong = red_cov > 0.5
            overlap = (mask[strong] > 0).mean()
            assert overlap > 0.85


class TestMockEditor:
    def test_matches_defining_formula(self):
        # The oracle is the formula itself, computed independently here.
        editor = MockRecolorEditor()
        original = red_square_on_black()
        rendered = ImageBuffer(np.clip(original.data + 0.05, 0, 1))
        out = editor.edit_image(rendered, original, "make red cluster (0.0, 0.0, 1.0)", 0.5)
        m = color_region_mask(original, "red").astype(float)[:, :, None]
        blend = 0.8 * np.array([0.0, 0.0, 1.0]) + 0.2 * rendered.data
        expected = m * blend + (1 - m) * rendered.data
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_noise_level_is_irrelevant(self):
        editor = MockRecolorEditor()
        original = red_square_on_black()
        rendered = original.copy()
        a = editor.edit_image(rendered, original, "turn the red cluster blue", 0.1)
        b = editor.edit_image(rendered, original, "turn the red cluster blue", 0.9)
        assert a.data.tobytes() == b.data.tobytes()

    def test_identity_instruction_returns_render(self):
        editor = MockRecolorEditor()
        original = red_square_on_black()
        rendered = ImageBuffer(np.clip(original.data * 0.9, 0, 1))
        out = editor.edit_image(rendered, original, "", 0.4)
        np.testing.assert_array_equal(out.data, rendered.data)

    def test_color_word_target(self):
        editor = MockRecolorEditor()
        original = red_square_on_black()
        out = editor.edit_image(original.copy(), original, "Turn the red cluster blue", 0.5)
        assert out.data[6, 5, 2] > 0.7  # region pushed toward blue
        np.testing.assert_array_equal(out.data[0, 0], original.data[0, 0])

    def test_unparseable_instruction_rejected(self):
        editor = MockRecolorEditor()
        img = red_square_on_black()
        with pytest.raises(BackendError):
            editor.edit_image(img, img, "rotate the scene by 90 degrees", 0.5)


class _ScriptedTransport(httpx.BaseTransport):
    def __init__(self, script):
        self.script = script
        self.requests = []

    def handle_request(self, request):
        self.requests.append(request)
        status, body = self.script.pop(0)
        return httpx.Response(status, json=body)


class TestHttpAdapters:
    def cfg(self, retries=1):
        return BackendConfig(endpoint="http://models.test", mode="http", retries=retries,
                             image_guidance=1.5, text_guidance=7.5)

    def test_retry_on_503_then_success(self):
        transport = _ScriptedTransport([(503, {}), (200, {"text": "a bench"})])
        backends = make_http_backends(self.cfg(retries=1), transport)
        assert backends.captioner.caption(solid((0.5, 0.5, 0.5))) == "a bench"
        assert len(transport.requests) == 2

    def test_retries_exhausted_raises(self):
        transport = _ScriptedTransport([(503, {}), (503, {})])
        backends = make_http_backends(self.cfg(retries=1), transport)
        with pytest.raises(BackendRequestError):
            backends.captioner.caption(solid((0.5, 0.5, 0.5)))

    def test_caption_body_schema(self):
        transport = _ScriptedTransport([(200, {"text": "ok"})])
        backends = make_http_backends(self.cfg(), transport)
        backends.captioner.caption(solid((0.2, 0.2, 0.2)))
        body = json.loads(transport.requests[0].content)
        assert set(body) == {"image_png_b64"}
        decode_png(base64.b64decode(body["image_png_b64"]))  # round-trips

    def test_segment_contract_enforced(self):
        wrong = encode_png(ImageBuffer(np.zeros((4, 4, 1))))
        transport = _ScriptedTransport(
            [(200, {"mask_png_b64": base64.b64encode(wrong).decode()})]
        )
        backends = make_http_backends(self.cfg(), transport)
        with pytest.raises(BackendContractError):
            backends.segmenter.segment(solid((0.1, 0.1, 0.1)), "red")

    def test_edit_round_trip_with_guidance(self):
        img = solid((0.3, 0.3, 0.3), w=8, h=8)
        reply = base64.b64encode(encode_png(img)).decode()
        transport = _ScriptedTransport([(200, {"image_png_b64": reply})])
        backends = make_http_backends(self.cfg(), transport)
        out = backends.editor.edit_image(img, img, "do it", 0.3)
        assert (out.height, out.width, out.channels) == (8, 8, 3)
        body = json.loads(transport.requests[0].content)
        assert body["image_guidance"] == 1.5 and body["text_guidance"] == 7.5
        assert body["noise_level"] == 0.3

    def test_chat_body_schema(self):
        transport = _ScriptedTransport([(200, {"text": "bench"})])
        backends = make_http_backends(self.cfg(), transport)
        backends.assistant.chat("sys", "usr")
        body = json.loads(transport.requests[0].content)
        assert body == {"system": "sys", "user": "usr"}


def test_make_mock_backends_fixture_dir(tmp_path):
    img = red_square_on_black()
    (tmp_path / "images").mkdir()
    (tmp_path / "images" / "bench_view_0.png").write_bytes(encode_png(img))
    (tmp_path / "captions.json").write_text(
        json.dumps({"bench_view_0": "a bench next to a bicycle in a park"})
    )
    backends = make_mock_backends(tmp_path)
    assert backends.captioner.caption(img) == "a bench next to a bicycle in a park"
