"""HTTP service exposing scene management, rendering, picking, RoI
operations, and session control."""

from __future__ import annotations

import json
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import Response, StreamingResponse
from pydantic import BaseModel

from .. import __version__
from ..core.cameras import CameraValidationError, load_cameras
from ..core.ply import PlyParseError, PlySchemaError, export_ply, import_ply
from ..core.types import ContractError, GaussianScene, ImageBuffer
from ..raster.png import encode_png
from ..raster.projection import ProjectedScene
from ..raster.render import pick as pick_gaussian
from ..raster.render import render
from ..roi.types import RoiModification
from .state import Registry, ServiceConfig, ServiceSession

OVERLAY_ALPHA = 0.5
OVERLAY_COLOR = np.array([1.0, 0.0, 0.0])


class PickRequest(BaseModel):
    view: int
    x: int
    y: int
    session_id: str | None = None


class BoxSuggestRequest(BaseModel):
    view: int
    x0: int
    y0: int
    x1: int
    y1: int
    session_id: str | None = None


class SessionCreateRequest(BaseModel):
    scene_id: str
    instruction: str
    request_id: str | None = None


class RoiRequest(BaseModel):
    add: list[int] = []
    delete: list[int] = []
    box: dict | None = None
    request_id: str | None = None

    model_config = {"populate_by_name": True}

    def __init__(self, **data):
        # The wire field is "del", a Python keyword.
        if "del" in data:
            data["delete"] = data.pop("del")
        super().__init__(**data)


class StartRequest(BaseModel):
    max_rounds: int | None = None
    request_id: str | None = None


class StageRequest(BaseModel):
    request_id: str | None = None


def render_with_overlay(scene: GaussianScene, camera, channel: str) -> ImageBuffer:
    if channel in ("color", "roi"):
        return render(scene, camera, channel)
    if channel == "overlay":
        color = render(scene, camera, "color").data
        roi = render(scene, camera, "roi").data[:, :, 0:1]
        # Ignore the off-state residue of the logit parameterization so an
        # unlifted scene overlays exactly like its color frame.
        roi = np.where(roi > 1e-3, roi, 0.0)
        blended = color * (1.0 - OVERLAY_ALPHA * roi) + OVERLAY_COLOR * (OVERLAY_ALPHA * roi)
        return ImageBuffer(np.clip(blended, 0.0, 1.0))
    raise ContractError(f"unknown channel {channel!r}")


def create_app(config: ServiceConfig) -> FastAPI:
    registry = Registry(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        registry.shutdown()

    app = FastAPI(title="splatedit", version=__version__, lifespan=lifespan)
    app.state.registry = registry

    def get_scene(scene_id: str):
        stored = registry.scenes.get(scene_id)
        if stored is None:
            raise HTTPException(404, f"unknown scene {scene_id}")
        return stored

    def get_session(session_id: str) -> ServiceSession:
        session = registry.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return session

    def run_stage(session: ServiceSession, request_id: str | None, fn):
        cached = session.cached_response(request_id)
        if cached is not None:
            return cached
        future = session.worker.submit(fn)
        try:
            result = future.result(timeout=600.0)
        except Exception as exc:
            raise HTTPException(502, f"stage failed: {exc}") from exc
        session.remember_response(request_id, result)
        return result

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/scenes")
    async def upload_scene(scene: UploadFile = File(...), cameras: UploadFile = File(...),
                           request_id: str | None = None):
        cached = registry.cached_scene_response(request_id)
        if cached is not None:
            return cached
        ply_bytes = await scene.read()
        cameras_text = await cameras.read()
        try:
            parsed_scene = import_ply(ply_bytes)
            parsed_cameras = load_cameras(cameras_text)
        except (PlyParseError, PlySchemaError, CameraValidationError) as exc:
            raise HTTPException(422, str(exc)) from exc
        if not parsed_cameras:
            raise HTTPException(422, "camera list is empty")
        scene_id = registry.add_scene(parsed_scene, parsed_cameras)
        response = {"scene_id": scene_id, "num_gaussians": len(parsed_scene),
                    "num_cameras": len(parsed_cameras)}
        registry.remember_scene_response(request_id, response)
        return response

    @app.get("/scenes/{scene_id}/render")
    def render_view(scene_id: str, view: int = 0, channel: str = "color",
                    session_id: str | None = None):
        stored = get_scene(scene_id)
        if not (0 <= view < len(stored.cameras)):
            raise HTTPException(422, f"view {view} out of range")
        scene = stored.scene
        if session_id is not None:
            scene = get_session(session_id).snapshot()
        try:
            image = render_with_overlay(scene, stored.cameras[view], channel)
        except ContractError as exc:
            raise HTTPException(422, str(exc)) from exc
        return Response(content=encode_png(image), media_type="image/png")

    @app.post("/scenes/{scene_id}/pick")
    def pick_point(scene_id: str, request: PickRequest):
        stored = get_scene(scene_id)
        if not (0 <= request.view < len(stored.cameras)):
            raise HTTPException(422, f"view {request.view} out of range")
        scene = stored.scene
        if request.session_id is not None:
            scene = get_session(request.session_id).snapshot()
        try:
            index = pick_gaussian(scene, stored.cameras[request.view], (request.x, request.y))
        except ContractError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"gaussian_index": index}

    @app.post("/scenes/{scene_id}/box")
    def suggest_box(scene_id: str, request: BoxSuggestRequest):
        """Convert a 2D drag rectangle into a 3D box suggestion: the
        robust extent of the points whose centers project inside it."""
        stored = get_scene(scene_id)
        if not (0 <= request.view < len(stored.cameras)):
            raise HTTPException(422, f"view {request.view} out of range")
        scene = stored.scene
        if request.session_id is not None:
            scene = get_session(request.session_id).snapshot()
        camera = stored.cameras[request.view]
        proj = ProjectedScene(scene, camera)
        if len(proj) == 0:
            return {"box": None}
        x_lo, x_hi = sorted((request.x0, request.x1))
        y_lo, y_hi = sorted((request.y0, request.y1))
        inside = (
            (proj.means2d[:, 0] >= x_lo) & (proj.means2d[:, 0] <= x_hi + 1)
            & (proj.means2d[:, 1] >= y_lo) & (proj.means2d[:, 1] <= y_hi + 1)
        )
        if not np.any(inside):
            return {"box": None}
        positions = scene.positions[proj.indices[inside]]
        lo = positions.min(axis=0)
        hi = positions.max(axis=0)
        pad = 0.05 * np.maximum(hi - lo, 1e-6)
        return {"box": {"min": (lo - pad).tolist(), "max": (hi + pad).tolist()}}

    @app.post("/sessions")
    def create_session(request: SessionCreateRequest):
        cached = registry.cached_scene_response(request.request_id)
        if cached is not None:
            return cached
        if request.scene_id not in registry.scenes:
            raise HTTPException(404, f"unknown scene {request.scene_id}")
        session = registry.create_session(request.scene_id, request.instruction)
        response = session.descriptor()
        registry.remember_scene_response(request.request_id, response)
        return response

    @app.post("/sessions/{session_id}/describe")
    def describe(session_id: str, request: StageRequest | None = None):
        session = get_session(session_id)
        rid = request.request_id if request else None
        return run_stage(session, rid, session.do_describe)

    @app.post("/sessions/{session_id}/extract")
    def extract(session_id: str, request: StageRequest | None = None):
        session = get_session(session_id)
        rid = request.request_id if request else None
        return run_stage(session, rid, session.do_extract)

    @app.post("/sessions/{session_id}/masks")
    def masks(session_id: str, request: StageRequest | None = None):
        session = get_session(session_id)
        rid = request.request_id if request else None
        return run_stage(session, rid, session.do_masks)

    @app.post("/sessions/{session_id}/lift")
    def lift(session_id: str, request: StageRequest | None = None):
        session = get_session(session_id)
        rid = request.request_id if request else None
        return run_stage(session, rid, session.do_lift)

    @app.post("/sessions/{session_id}/roi")
    def apply_roi(session_id: str, request: RoiRequest):
        session = get_session(session_id)
        try:
            mods = RoiModification(
                add_indices=frozenset(request.add),
                del_indices=frozenset(request.delete),
                box=None if request.box is None
                else RoiModification.from_json_dict({"box": request.box}).box,
            )
        except ContractError as exc:
            raise HTTPException(422, str(exc)) from exc
        return run_stage(session, request.request_id,
                         lambda: session.do_apply_mods(mods))

    @app.post("/sessions/{session_id}/start")
    def start(session_id: str, request: StartRequest | None = None):
        session = get_session(session_id)
        rid = request.request_id if request else None
        cached = session.cached_response(rid)
        if cached is not None:
            return cached
        try:
            session.start_rounds(request.max_rounds if request else None)
        except (ValueError, ContractError) as exc:
            raise HTTPException(409, str(exc)) from exc
        response = session.descriptor()
        session.remember_response(rid, response)
        return response

    @app.post("/sessions/{session_id}/pause")
    def pause(session_id: str):
        session = get_session(session_id)
        session.request_pause()
        session.wait_idle(timeout=60.0)
        return session.descriptor()

    @app.post("/sessions/{session_id}/resume")
    def resume(session_id: str, request: StartRequest | None = None):
        session = get_session(session_id)
        try:
            session.resume(request.max_rounds if request else None)
        except ValueError as exc:
            raise HTTPException(409, str(exc)) from exc
        return session.descriptor()

    @app.get("/sessions/{session_id}")
    def descriptor(session_id: str):
        return get_session(session_id).descriptor()

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str):
        session = get_session(session_id)

        def generate():
            for event in session.event_stream():
                yield json.dumps(event) + "\n"

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        session = get_session(session_id)
        data = export_ply(session.snapshot(), precision="float")
        return Response(
            content=data,
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{session_id}.ply"'},
        )

    return app
