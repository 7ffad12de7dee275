import hashlib
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from splatedit.clients import make_mock_backends
from splatedit.core.cameras import dump_cameras
from splatedit.core.ply import export_ply, import_ply
from splatedit.engine import EditConfig
from splatedit.optim import LiftConfig
from splatedit.raster.png import decode_png
from splatedit.service import ServiceConfig, create_app
from splatedit.synthetic import make_two_cluster_scene, orbit_cameras

INSTRUCTION = "Turn the red cluster blue"


@pytest.fixture()
def client():
    config = ServiceConfig(
        backends=make_mock_backends(),
        lift=LiftConfig(iterations=60),
        edit=EditConfig(seed=5, max_rounds=200),
        description_views=3,
        mask_views=4,
    )
    with TestClient(create_app(config)) as test_client:
        yield test_client


@pytest.fixture()
def scene_id(client):
    ply = export_ply(make_two_cluster_scene(), precision="float")
    cams = dump_cameras(orbit_cameras(6))
    response = client.post(
        "/scenes",
        files={
            "scene": ("scene.ply", ply, "application/octet-stream"),
            "cameras": ("cameras.json", cams, "application/json"),
        },
    )
    assert response.status_code == 200, response.text
    return response.json()["scene_id"]


def make_session(client, scene_id, instruction=INSTRUCTION):
    response = client.post("/sessions", json={"scene_id": scene_id, "instruction": instruction})
    assert response.status_code == 200, response.text
    return response.json()["id"]


def run_stages(client, session_id):
    for stage in ("describe", "extract", "masks", "lift"):
        response = client.post(f"/sessions/{session_id}/{stage}", json={})
        assert response.status_code == 200, f"{stage}: {response.text}"
    return client.get(f"/sessions/{session_id}").json()


class TestBasics:
    def test_health_reports_version(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_upload_render_round_trip(self, client, scene_id):
        response = client.get(f"/scenes/{scene_id}/render", params={"view": 0})
        assert response.status_code == 200
        image = decode_png(response.content)
        assert (image.width, image.height) == (64, 64)

    def test_parallel_renders_identical_bytes(self, client, scene_id):
        a = client.get(f"/scenes/{scene_id}/render", params={"view": 2}).content
        b = client.get(f"/scenes/{scene_id}/render", params={"view": 2}).content
        assert a == b

    def test_unknown_scene_404(self, client):
        assert client.get("/scenes/nope/render").status_code == 404

    def test_bad_view_rejected(self, client, scene_id):
        assert client.get(f"/scenes/{scene_id}/render", params={"view": 99}).status_code == 422

    def test_malformed_ply_rejected(self, client):
        response = client.post(
            "/scenes",
            files={
                "scene": ("scene.ply", b"not a ply", "application/octet-stream"),
                "cameras": ("cameras.json", dump_cameras(orbit_cameras(2)), "application/json"),
            },
        )
        assert response.status_code == 422

    def test_box_suggestion_from_drag(self, client, scene_id):
        # Full-frame drag covers both clusters; the box tracks the scene extent.
        body = client.post(
            f"/scenes/{scene_id}/box",
            json={"view": 0, "x0": 0, "y0": 0, "x1": 63, "y1": 63},
        ).json()
        assert body["box"] is not None
        lo, hi = body["box"]["min"], body["box"]["max"]
        assert all(l < h for l, h in zip(lo, hi))
        assert lo[0] < -0.5 and hi[0] > 0.5  # spans both clusters on x

        empty = client.post(
            f"/scenes/{scene_id}/box", json={"view": 0, "x0": 0, "y0": 0, "x1": 1, "y1": 1}
        ).json()
        assert empty["box"] is None

    def test_pick_endpoint(self, client, scene_id):
        hit = None
        for x in range(0, 64, 4):
            for y in range(0, 64, 4):
                body = client.post(
                    f"/scenes/{scene_id}/pick", json={"view": 0, "x": x, "y": y}
                ).json()
                if body["gaussian_index"] is not None:
                    hit = body["gaussian_index"]
                    break
            if hit is not None:
                break
        assert hit is not None and 0 <= hit < 100
        corner = client.post(f"/scenes/{scene_id}/pick", json={"view": 0, "x": 0, "y": 0}).json()
        assert corner["gaussian_index"] is None
        out_of_bounds = client.post(
            f"/scenes/{scene_id}/pick", json={"view": 0, "x": 200, "y": 0}
        )
        assert out_of_bounds.status_code == 422


class TestSessionFlow:
    def test_stage_sequence_and_edit(self, client, scene_id):
        session_id = make_session(client, scene_id)
        descriptor = run_stages(client, session_id)
        assert descriptor["t_roi"] == "red cluster"
        assert descriptor["roi_size"] and descriptor["roi_size"] >= 45

        start = client.post(f"/sessions/{session_id}/start", json={"max_rounds": 10})
        assert start.status_code == 200

        events = []
        with client.stream("GET", f"/sessions/{session_id}/events") as stream:
            for line in stream.iter_lines():
                if line:
                    events.append(json.loads(line))
        assert [e["round"] for e in events] == list(range(1, 11))
        assert all(np.isfinite(e["loss"]) for e in events)

        final = client.get(f"/sessions/{session_id}").json()
        assert final["status"] == "done" and final["round"] == 10

        export = client.get(f"/sessions/{session_id}/export")
        assert export.status_code == 200
        edited = import_ply(export.content)
        assert len(edited) == 100

    def test_roi_modification_endpoint(self, client, scene_id):
        session_id = make_session(client, scene_id)
        run_stages(client, session_id)
        before = client.get(f"/sessions/{session_id}").json()["roi_size"]

        body = client.post(
            f"/sessions/{session_id}/roi", json={"add": [60, 61], "del": [0]}
        ).json()
        assert body["selected"] == before + 2 - 1

        boxed = client.post(
            f"/sessions/{session_id}/roi",
            json={"add": [], "del": [], "box": {"min": [-10, -10, -10], "max": [10, 10, 10]}},
        ).json()
        assert boxed["selected"] == before + 1  # everything is inside the box

        disjoint = client.post(
            f"/sessions/{session_id}/roi", json={"add": [5], "del": [5]}
        )
        assert disjoint.status_code == 422

    def test_pause_resume_preserves_round_counter(self, client, scene_id):
        session_id = make_session(client, scene_id)
        run_stages(client, session_id)
        client.post(f"/sessions/{session_id}/start", json={"max_rounds": 200})
        paused = client.post(f"/sessions/{session_id}/pause").json()
        assert paused["status"] in ("paused", "done")
        rounds_at_pause = paused["round"]

        resumed = client.post(
            f"/sessions/{session_id}/resume", json={"max_rounds": rounds_at_pause + 3}
        )
        assert resumed.status_code == 200
        client.post(f"/sessions/{session_id}/pause")
        final = client.get(f"/sessions/{session_id}").json()
        assert final["round"] >= rounds_at_pause

    def test_start_requires_lifted_roi(self, client, scene_id):
        session_id = make_session(client, scene_id)
        response = client.post(f"/sessions/{session_id}/start", json={"max_rounds": 5})
        assert response.status_code == 409

    def test_overlay_of_empty_roi_equals_color_frame(self, client, scene_id):
        color = client.get(f"/scenes/{scene_id}/render", params={"view": 1, "channel": "color"})
        overlay = client.get(f"/scenes/{scene_id}/render", params={"view": 1, "channel": "overlay"})
        assert color.content == overlay.content

    def test_overlay_after_lift_differs(self, client, scene_id):
        session_id = make_session(client, scene_id)
        run_stages(client, session_id)
        color = client.get(
            f"/scenes/{scene_id}/render",
            params={"view": 1, "channel": "color", "session_id": session_id},
        )
        overlay = client.get(
            f"/scenes/{scene_id}/render",
            params={"view": 1, "channel": "overlay", "session_id": session_id},
        )
        assert color.content != overlay.content


class TestContracts:
    def test_mutating_endpoints_idempotent_under_request_id(self, client, scene_id):
        first = client.post(
            "/sessions",
            json={"scene_id": scene_id, "instruction": INSTRUCTION, "request_id": "req-1"},
        ).json()
        second = client.post(
            "/sessions",
            json={"scene_id": scene_id, "instruction": INSTRUCTION, "request_id": "req-1"},
        ).json()
        assert first["id"] == second["id"]

        session_id = make_session(client, scene_id)
        run_stages(client, session_id)
        a = client.post(
            f"/sessions/{session_id}/roi", json={"add": [60], "del": [], "request_id": "mod-1"}
        ).json()
        b = client.post(
            f"/sessions/{session_id}/roi", json={"add": [60], "del": [], "request_id": "mod-1"}
        ).json()
        assert a == b

    def test_get_endpoints_do_not_mutate(self, client, scene_id):
        session_id = make_session(client, scene_id)
        run_stages(client, session_id)

        def state_hash():
            export = client.get(f"/sessions/{session_id}/export").content
            descriptor = json.dumps(client.get(f"/sessions/{session_id}").json(), sort_keys=True)
            return hashlib.sha256(export + descriptor.encode()).hexdigest()

        before = state_hash()
        client.get(f"/sessions/{session_id}")
        client.get(f"/scenes/{scene_id}/render", params={"view": 0, "session_id": session_id})
        client.get(f"/scenes/{scene_id}/render", params={"view": 0, "channel": "roi",
                                                         "session_id": session_id})
        assert state_hash() == before
