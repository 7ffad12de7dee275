"""Command-line interface: render, RoI staging, editing, and the service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .clients.base import BackendConfig, PromptSet
from .clients.http import make_http_backends
from .clients.mock import make_mock_backends
from .core.cameras import load_cameras
from .core.ply import export_ply, import_ply
from .core.types import GaussianScene
from .engine.config import EditConfig
from .engine.pipeline import PipelineConfig, PipelineStageError, run_pipeline
from .engine.session import EditSession, run_session
from .optim.losses import LiftConfig
from .raster.png import encode_png
from .raster.render import render
from .roi.describe import (
    ExtractionFailedError,
    acquire_masks,
    extract_instruction_roi,
    generate_description,
)
from .roi.lift import lift_roi
from .roi.types import GaussianRoi, RoiModification
from .service.app import create_app
from .service.state import ServiceConfig


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _read_scene(path: str) -> GaussianScene:
    p = Path(path)
    if not p.exists():
        _fail(f"scene file not found: {p}")
    try:
        return import_ply(p.read_bytes())
    except Exception as exc:
        _fail(f"scene: could not parse {p}: {exc}")


def _read_cameras(path: str):
    p = Path(path)
    if not p.exists():
        _fail(f"cameras file not found: {p}")
    try:
        cameras = load_cameras(p.read_text())
    except Exception as exc:
        _fail(f"cameras: could not parse {p}: {exc}")
    if not cameras:
        _fail(f"cameras: {p} contains no cameras")
    return cameras


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        _fail(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        _fail(f"config: invalid JSON in {p}: {exc}")


def _pipeline_config(raw: dict) -> PipelineConfig:
    return PipelineConfig(
        prompts=PromptSet(**raw.get("prompts", {})),
        lift=LiftConfig(**raw.get("lift", {})),
        edit=EditConfig.from_json_dict(raw.get("edit", {})),
        description_views=raw.get("description_views", 6),
        mask_views=raw.get("mask_views", 8),
        use_text_roi=raw.get("use_text_roi", True),
    )


def _backends(mock_dir: str | None, backend_url: str | None, raw: dict):
    if backend_url:
        cfg = BackendConfig(endpoint=backend_url, mode="http", **raw.get("backend", {}))
        return make_http_backends(cfg)
    return make_mock_backends(mock_dir)


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


scene_opt = click.option("--scene", required=True, help="Scene PLY path.")
cameras_opt = click.option("--cameras", required=True, help="Cameras JSON path.")
config_opt = click.option("--config", default=None, help="JSON config file.")
mock_opt = click.option("--mock", "mock_dir", default=None,
                        help="Use mock backends, optionally loading fixtures from DIR.")
url_opt = click.option("--backend-url", default=None, help="HTTP model backend base URL.")
out_opt = click.option("--out", default="out", show_default=True,
                       help="Output directory for artifacts.")


@click.group()
@click.version_option(version=__version__)
def main():
    """Region-of-interest editing for Gaussian splat scenes."""


@main.command(name="render")
@scene_opt
@cameras_opt
@click.option("--view", default=0, show_default=True, type=int)
@click.option("--channel", default="color", show_default=True,
              type=click.Choice(["color", "roi", "overlay"]))
@out_opt
def render_cmd(scene, cameras, view, channel, out):
    """Render one view to a PNG."""
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    if not (0 <= view < len(cams)):
        _fail(f"view {view} out of range (0..{len(cams) - 1})")
    if channel == "overlay":
        from .service.app import render_with_overlay

        image = render_with_overlay(scn, cams[view], "overlay")
    else:
        image = render(scn, cams[view], channel)
    path = _out_dir(out) / f"view{view}.png"
    path.write_bytes(encode_png(image))
    click.echo(f"wrote {path}")


@main.command(name="describe")
@scene_opt
@cameras_opt
@config_opt
@mock_opt
@url_opt
@out_opt
def describe_cmd(scene, cameras, config, mock_dir, backend_url, out):
    """Generate the multi-view scene description."""
    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    backends = _backends(mock_dir, backend_url, raw)
    try:
        desc = generate_description(
            scn, cams, min(cfg.description_views, len(cams)), backends, cfg.prompts,
            seed=cfg.edit.seed,
        )
    except Exception as exc:
        _fail(f"describe: {exc}")
    path = _out_dir(out) / "description.json"
    path.write_text(json.dumps(
        {"merged": desc.merged, "per_view": [[v, c] for v, c in desc.per_view_captions]},
        indent=2,
    ))
    click.echo(desc.merged)
    click.echo(f"wrote {path}")


@main.command(name="extract-roi")
@scene_opt
@cameras_opt
@click.option("--instruction", required=True)
@config_opt
@mock_opt
@url_opt
@out_opt
def extract_cmd(scene, cameras, instruction, config, mock_dir, backend_url, out):
    """Extract the instruction's target phrase."""
    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    backends = _backends(mock_dir, backend_url, raw)
    try:
        desc = generate_description(
            scn, cams, min(cfg.description_views, len(cams)), backends, cfg.prompts,
            seed=cfg.edit.seed,
        )
        try:
            phrase = extract_instruction_roi(desc.merged, instruction, backends, cfg.prompts)
            fell_back = False
        except ExtractionFailedError:
            phrase, fell_back = instruction, True
    except Exception as exc:
        _fail(f"extract-roi: {exc}")
    path = _out_dir(out) / "roi_phrase.json"
    path.write_text(json.dumps({"t_roi": phrase, "fell_back": fell_back}, indent=2))
    click.echo(phrase)


@main.command(name="lift")
@scene_opt
@cameras_opt
@click.option("--phrase", required=True, help="Target phrase to ground and lift.")
@config_opt
@mock_opt
@url_opt
@out_opt
def lift_cmd(scene, cameras, phrase, config, mock_dir, backend_url, out):
    """Ground a phrase into masks and lift them onto the RoI attribute."""
    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    backends = _backends(mock_dir, backend_url, raw)
    try:
        masks = acquire_masks(scn, cams, phrase, backends,
                              min(cfg.mask_views, len(cams)), seed=cfg.edit.seed)
        roi = lift_roi(scn, masks, cfg.lift)
    except Exception as exc:
        _fail(f"lift: {exc}")
    out_path = _out_dir(out)
    (out_path / "lifted.ply").write_bytes(export_ply(scn))
    (out_path / "roi.json").write_text(json.dumps(
        {"selected": sorted(int(i) for i in roi.indices()),
         "count": int(roi.membership.sum())}, indent=2,
    ))
    click.echo(f"lifted RoI: {int(roi.membership.sum())} of {len(scn)} gaussians")
    click.echo(f"wrote {out_path / 'lifted.ply'}")


@main.command(name="edit")
@scene_opt
@cameras_opt
@click.option("--instruction", required=True)
@config_opt
@mock_opt
@url_opt
@out_opt
def edit_cmd(scene, cameras, instruction, config, mock_dir, backend_url, out):
    """Run masked edit rounds on a scene with an already-lifted RoI."""
    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    backends = _backends(mock_dir, backend_url, raw)
    session = EditSession(scn, instruction, cfg.edit)
    session.roi = GaussianRoi.from_scene(scn, cfg.lift.threshold)
    if session.roi.membership.sum() == 0:
        _fail("edit: the scene has no lifted RoI (run `lift` first)")
    try:
        edited = run_session(session, cams, backends, cfg.edit)
    except Exception as exc:
        _fail(f"edit: {exc}")
    out_path = _out_dir(out)
    (out_path / "edited.ply").write_bytes(export_ply(edited, precision="float"))
    (out_path / "report.json").write_text(json.dumps({
        "instruction": instruction,
        "rounds": session.round,
        "status": session.status,
        "final_loss": session.loss_history[-1] if session.loss_history else None,
        "loss_history": session.loss_history,
    }, indent=2))
    click.echo(f"edited in {session.round} rounds; wrote {out_path / 'edited.ply'}")


@main.command(name="pipeline")
@scene_opt
@cameras_opt
@click.option("--instruction", required=True)
@click.option("--mods", default=None,
              help='RoI modification JSON, e.g. \'{"add":[1],"del":[2]}\'.')
@config_opt
@mock_opt
@url_opt
@out_opt
def pipeline_cmd(scene, cameras, instruction, mods, config, mock_dir, backend_url, out):
    """Full pipeline: describe, extract, ground, lift, edit."""
    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    scn = _read_scene(scene)
    cams = _read_cameras(cameras)
    backends = _backends(mock_dir, backend_url, raw)
    modification = RoiModification()
    if mods:
        try:
            modification = RoiModification.from_json_dict(json.loads(mods))
        except Exception as exc:
            _fail(f"mods: {exc}")
    try:
        result = run_pipeline(scn, cams, instruction, modification, backends, cfg)
    except PipelineStageError as exc:
        _fail(str(exc))
    out_path = _out_dir(out)
    (out_path / "edited.ply").write_bytes(export_ply(result.edited_scene, precision="float"))
    report = {
        "instruction": instruction,
        "t_roi": result.target_phrase,
        "extraction_fell_back": result.extraction_fell_back,
        "description": result.description.merged if result.description else None,
        "roi_count": int(result.roi.membership.sum()) if result.roi else 0,
        "rounds": len(result.diagnostics),
        "final_loss": result.diagnostics[-1].loss if result.diagnostics else None,
        "stage_seconds": result.stage_seconds,
    }
    (out_path / "report.json").write_text(json.dumps(report, indent=2))
    click.echo(f"t_roi: {result.target_phrase}")
    click.echo(f"wrote {out_path / 'edited.ply'} and {out_path / 'report.json'}")


@main.command(name="serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@config_opt
@mock_opt
@url_opt
@click.option("--session-dir", default=None, help="Directory for session checkpoints.")
def serve_cmd(host, port, config, mock_dir, backend_url, session_dir):
    """Run the HTTP service."""
    import uvicorn

    raw = _read_config(config)
    cfg = _pipeline_config(raw)
    service = ServiceConfig(
        backends=_backends(mock_dir, backend_url, raw),
        prompts=cfg.prompts,
        lift=cfg.lift,
        edit=cfg.edit,
        description_views=cfg.description_views,
        mask_views=cfg.mask_views,
        session_dir=session_dir,
    )
    uvicorn.run(create_app(service), host=host, port=port)


if __name__ == "__main__":
    main()
