from .config import ATTRIBUTE_KEYS, DEFAULT_LEARNING_RATES, EditConfig
from .pipeline import PipelineConfig, PipelineResult, PipelineStageError, run_pipeline
from .session import (
    EditSession,
    StepDiagnostics,
    edit_step,
    load_checkpoint,
    run_session,
    save_checkpoint,
)

__all__ = [
    "ATTRIBUTE_KEYS",
    "DEFAULT_LEARNING_RATES",
    "EditConfig",
    "EditSession",
    "PipelineConfig",
    "PipelineResult",
    "PipelineStageError",
    "StepDiagnostics",
    "edit_step",
    "load_checkpoint",
    "run_pipeline",
    "run_session",
    "save_checkpoint",
]
