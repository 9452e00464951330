"""Training loop for the joint denoising + grounding objective."""

from src.training.presets import PRESET_NAMES, get_preset, resolve_loss_layers
from src.training.trainer import (
    EVAL_METRICS_FILE,
    FINAL_CHECKPOINT,
    METRICS_FILE,
    Trainer,
    TrainResult,
    merge_breakdowns,
)

__all__ = [
    "PRESET_NAMES",
    "get_preset",
    "resolve_loss_layers",
    "EVAL_METRICS_FILE",
    "FINAL_CHECKPOINT",
    "METRICS_FILE",
    "Trainer",
    "TrainResult",
    "merge_breakdowns",
]
