"""Pydantic records shared across data, training, evaluation and the CLI."""

from src.schemas.data import (
    DATASET_FORMAT_VERSION,
    DatasetConfig,
    DatasetManifest,
    DetectorThresholds,
    GroundingRecord,
    MetadataRecord,
    ObjectSpec,
    SceneSpec,
)
from src.schemas.evaluation import (
    EVAL_SCHEMA_VERSION,
    CriterionResult,
    EvalConfig,
    EvalMetadata,
    EvalReport,
    ExperimentSummary,
    MGScore,
    MultiGenPrompt,
    MultiGenSuite,
    RunScores,
    SamplerConfig,
)
from src.schemas.model import ModelConfig
from src.schemas.run import RunManifest
from src.schemas.training import DEFAULT_LOSS_LAYERS, LossWeights, TrainConfig

__all__ = [
    # Data schemas
    "DATASET_FORMAT_VERSION",
    "DatasetConfig",
    "DatasetManifest",
    "DetectorThresholds",
    "GroundingRecord",
    "MetadataRecord",
    "ObjectSpec",
    "SceneSpec",
    # Evaluation schemas
    "EVAL_SCHEMA_VERSION",
    "CriterionResult",
    "EvalConfig",
    "EvalMetadata",
    "EvalReport",
    "ExperimentSummary",
    "MGScore",
    "MultiGenPrompt",
    "MultiGenSuite",
    "RunScores",
    "SamplerConfig",
    # Model / training schemas
    "ModelConfig",
    "DEFAULT_LOSS_LAYERS",
    "LossWeights",
    "TrainConfig",
    # Run schemas
    "RunManifest",
]
