"""MultiGen scoring, oracle detection, attention mIoU and the async harness."""

from src.evaluation.detector import oracle_detect, shape_score, validate_detector
from src.evaluation.experiment import check_experiment, final_denoise
from src.evaluation.harness import EvaluationHarness, EvaluationOutcome
from src.evaluation.multigen import (
    MultiGenScores,
    build_multigen,
    format_prompt,
    load_suite,
    mg_scores,
    save_suite,
)
from src.evaluation.segmentation import (
    AttentionMIoU,
    attention_miou,
    read_attention,
    token_iou,
)

__all__ = [
    "oracle_detect",
    "shape_score",
    "validate_detector",
    "check_experiment",
    "final_denoise",
    "EvaluationHarness",
    "EvaluationOutcome",
    "MultiGenScores",
    "build_multigen",
    "format_prompt",
    "load_suite",
    "mg_scores",
    "save_suite",
    "AttentionMIoU",
    "attention_miou",
    "read_attention",
    "token_iou",
]
