"""Server-side session state and the per-session worker.

All mutations of a session funnel through its worker thread's command
queue; HTTP handlers submit commands and wait on futures. Reads never
touch the queue: they see the last committed snapshot, which the edit
loop refreshes at round boundaries. Pause is the one out-of-band signal
(a flag the loop checks between rounds) so it works while a long run
command occupies the queue.
"""

from __future__ import annotations

import queue
import threading
import uuid
from concurrent.futures import Future
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..clients.base import ModelBackends, PromptSet
from ..core.types import Camera, GaussianScene
from ..engine.config import EditConfig
from ..engine.session import EditSession, run_session, save_checkpoint
from ..optim.losses import LiftConfig
from ..roi.combine import combine_roi
from ..roi.describe import (
    ExtractionFailedError,
    acquire_masks,
    extract_instruction_roi,
    generate_description,
)
from ..roi.lift import lift_roi
from ..roi.types import GaussianRoi, RoiModification


def new_id() -> str:
    return uuid.uuid4().hex[:12]


@dataclass
class ServiceConfig:
    backends: ModelBackends
    prompts: PromptSet = field(default_factory=PromptSet)
    lift: LiftConfig = field(default_factory=LiftConfig)
    edit: EditConfig = field(default_factory=EditConfig)
    description_views: int = 6
    mask_views: int = 8
    session_dir: str | None = None


@dataclass
class StoredScene:
    scene: GaussianScene
    cameras: list[Camera]


class SessionWorker:
    """One thread executing queued commands in arrival order."""

    def __init__(self, name: str):
        self._queue: "queue.Queue[tuple | None]" = queue.Queue()
        self._thread = threading.Thread(target=self._run, name=f"session-{name}", daemon=True)
        self._thread.start()

    def submit(self, fn) -> Future:
        future: Future = Future()
        self._queue.put((fn, future))
        return future

    def _run(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            fn, future = item
            try:
                future.set_result(fn())
            except BaseException as exc:  # surfaced through the future
                future.set_exception(exc)

    def shutdown(self):
        self._queue.put(None)
        self._thread.join(timeout=5.0)


class ServiceSession:
    """A scene-edit session plus its worker, artifacts, and event log."""

    def __init__(self, session_id: str, scene_id: str, stored: StoredScene,
                 instruction: str, config: ServiceConfig):
        self.id = session_id
        self.scene_id = scene_id
        self.stored = stored
        self.instruction = instruction
        self.config = config

        self.description = None
        self.target_phrase: str | None = None
        self.extraction_fell_back = False
        self.masks: list | None = None
        self.trained_roi: GaussianRoi | None = None
        self.engine: EditSession | None = None
        self.stage_seconds: dict[str, float] = {}
        self.last_error: str | None = None

        self.worker = SessionWorker(session_id)
        self.events: list[dict] = []
        self.events_cv = threading.Condition()
        self._snapshot_lock = threading.Lock()
        self._snapshot: GaussianScene | None = None
        self._run_future: Future | None = None
        self._request_cache: dict[str, object] = {}

    # -- idempotency ---------------------------------------------------------

    def cached_response(self, request_id: str | None):
        if request_id is None:
            return None
        return self._request_cache.get(request_id)

    def remember_response(self, request_id: str | None, response) -> None:
        if request_id is not None:
            self._request_cache[request_id] = response

    # -- snapshots -----------------------------------------------------------

    def commit_snapshot(self) -> None:
        scene = self.engine.working_scene if self.engine else self.stored.scene
        with self._snapshot_lock:
            self._snapshot = scene.copy()

    def snapshot(self) -> GaussianScene:
        with self._snapshot_lock:
            if self._snapshot is None:
                return self.stored.scene
            return self._snapshot

    # -- status --------------------------------------------------------------

    @property
    def status(self) -> str:
        if self.engine is not None:
            return self.engine.status
        return "idle"

    @property
    def round(self) -> int:
        return self.engine.round if self.engine else 0

    def descriptor(self) -> dict:
        return {
            "id": self.id,
            "scene_id": self.scene_id,
            "status": self.status,
            "round": self.round,
            "instruction": self.instruction,
            "t_roi": self.target_phrase,
            "extraction_fell_back": self.extraction_fell_back,
            "roi_size": int(self.engine.roi.membership.sum())
            if self.engine and self.engine.roi is not None
            else None,
            "stage_seconds": dict(self.stage_seconds),
            "last_loss": self.events[-1]["loss"] if self.events else None,
            "last_error": self.last_error,
        }

    # -- staged operations (run on the worker) --------------------------------

    def _timed(self, name: str, fn):
        import time

        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            self.last_error = f"{name}: {exc}"
            raise
        self.stage_seconds[name] = time.perf_counter() - start
        return result

    def do_describe(self) -> dict:
        views = min(self.config.description_views, len(self.stored.cameras))
        self.description = self._timed("describe", lambda: generate_description(
            self.stored.scene, self.stored.cameras, views,
            self.config.backends, self.config.prompts, seed=self.config.edit.seed,
        ))
        return {
            "merged": self.description.merged,
            "per_view": [[v, c] for v, c in self.description.per_view_captions],
        }

    def do_extract(self) -> dict:
        description = self.description.merged if self.description else ""
        try:
            self.target_phrase = self._timed("extract", lambda: extract_instruction_roi(
                description, self.instruction, self.config.backends, self.config.prompts,
            ))
            self.extraction_fell_back = False
        except ExtractionFailedError:
            self.target_phrase = self.instruction
            self.extraction_fell_back = True
            self.last_error = None
        return {"t_roi": self.target_phrase, "fell_back": self.extraction_fell_back}

    def do_masks(self) -> dict:
        if self.target_phrase is None:
            self.target_phrase = self.instruction
        views = min(self.config.mask_views, len(self.stored.cameras))
        self.masks = self._timed("masks", lambda: acquire_masks(
            self.stored.scene, self.stored.cameras, self.target_phrase,
            self.config.backends, views, seed=self.config.edit.seed,
        ))
        return {
            "views": len(self.masks),
            "coverage": [float(m.data.mean()) for _, m in self.masks],
        }

    def do_lift(self) -> dict:
        if not self.masks:
            raise ValueError("masks must be acquired before lifting")
        lifted = self.stored.scene.copy()
        self.trained_roi = self._timed("lift", lambda: lift_roi(
            lifted, self.masks, self.config.lift
        ))
        self.engine = EditSession(lifted, self.instruction, self.config.edit)
        self.engine.roi = self.trained_roi.copy()
        self.engine.set_status("idle")
        self.commit_snapshot()
        return {"selected": int(self.trained_roi.membership.sum())}

    def do_apply_mods(self, mods: RoiModification) -> dict:
        if self.engine is None or self.engine.roi is None:
            raise ValueError("RoI must be lifted before it can be modified")
        self.engine.roi = combine_roi(self.engine.roi, mods, self.engine.working_scene)
        return {"selected": int(self.engine.roi.membership.sum())}

    # -- the edit run ----------------------------------------------------------

    def start_rounds(self, max_rounds: int | None) -> None:
        if self.engine is None:
            raise ValueError("RoI must be lifted before editing starts")
        if self._run_future is not None and not self._run_future.done():
            return  # already running
        cfg = self.engine.config
        if max_rounds is not None:
            cfg = replace(cfg, max_rounds=max_rounds)
        self.engine.begin_editing()

        def task():
            def on_round(diag):
                self.commit_snapshot()
                with self.events_cv:
                    self.events.append({"round": diag.round, "loss": diag.loss})
                    self.events_cv.notify_all()

            try:
                run_session(self.engine, self.stored.cameras,
                            self.config.backends, cfg, on_round=on_round)
            except Exception as exc:
                self.engine.set_status("failed")
                self.last_error = str(exc)
            finally:
                self.commit_snapshot()
                with self.events_cv:
                    self.events_cv.notify_all()

        self._run_future = self.worker.submit(task)

    def request_pause(self) -> None:
        if self.engine is not None:
            self.engine.pause_requested.set()

    def resume(self, max_rounds: int | None = None) -> None:
        if self.engine is None or self.engine.status != "paused":
            raise ValueError("only a paused session can resume")
        self.start_rounds(max_rounds)

    def wait_idle(self, timeout: float = 60.0) -> None:
        if self._run_future is not None:
            try:
                self._run_future.result(timeout=timeout)
            except Exception:
                pass

    def event_stream(self):
        """Yield event dicts from the beginning, then live until terminal."""
        cursor = 0
        while True:
            with self.events_cv:
                while cursor >= len(self.events):
                    if self.status in ("done", "failed", "paused", "idle"):
                        return
                    self.events_cv.wait(timeout=0.5)
                batch = self.events[cursor:]
                cursor = len(self.events)
            yield from batch

    def checkpoint(self, directory: Path) -> None:
        if self.engine is not None:
            save_checkpoint(self.engine, directory / self.id)

    def close(self):
        self.request_pause()
        self.wait_idle(timeout=10.0)
        self.worker.shutdown()


class Registry:
    """In-memory stores for scenes and sessions."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.scenes: dict[str, StoredScene] = {}
        self.sessions: dict[str, ServiceSession] = {}
        self._scene_request_cache: dict[str, object] = {}
        self.lock = threading.Lock()

    def add_scene(self, scene: GaussianScene, cameras: list[Camera]) -> str:
        scene_id = new_id()
        with self.lock:
            self.scenes[scene_id] = StoredScene(scene=scene, cameras=cameras)
        return scene_id

    def create_session(self, scene_id: str, instruction: str) -> ServiceSession:
        stored = self.scenes[scene_id]
        session = ServiceSession(new_id(), scene_id, stored, instruction, self.config)
        with self.lock:
            self.sessions[session.id] = session
        return session

    def cached_scene_response(self, request_id: str | None):
        if request_id is None:
            return None
        return self._scene_request_cache.get(request_id)

    def remember_scene_response(self, request_id: str | None, response) -> None:
        if request_id is not None:
            self._scene_request_cache[request_id] = response

    def shutdown(self):
        for session in list(self.sessions.values()):
            if self.config.session_dir:
                session.request_pause()
                session.wait_idle()
                session.checkpoint(Path(self.config.session_dir))
            session.close()
