from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from src.utils.files import content_hash

EVAL_SCHEMA_VERSION = "eval-v1"


class SamplerConfig(BaseModel):
    """Inference settings."""

    sampler: Literal["ddim", "ancestral"] = Field(default="ddim")
    steps: int = Field(default=50, ge=1, description="Denoising steps")
    guidance_scale: float = Field(default=7.5, ge=0.0, description="Classifier-free guidance scale")
    eta: float = Field(default=0.0, ge=0.0, le=1.0, description="DDIM stochasticity")

    model_config = {"json_schema_serialization_defaults_required": True}


class EvalConfig(BaseModel):
    """MultiGen, object accuracy and attention-mIoU settings."""

    n_prompts: int = Field(default=100, ge=1, description="Number of prompts in the suite")
    rounds: int = Field(default=10, ge=1, description="Sampling rounds per prompt")
    categories_per_prompt: int = Field(default=5, ge=2)
    seed: int = Field(default=0)
    jobs: int = Field(default=1, ge=1, description="Concurrent sampling tasks")
    batch_size: int = Field(default=16, ge=1, description="Prompts sampled together")
    miou_layer: str = Field(default="dec.32")
    miou_timestep: int | None = Field(
        default=None, ge=1, description="Timestep for attention read-out (None -> T/2)"
    )
    miou_threshold: float = Field(default=0.4, gt=0.0, le=1.0)
    miou_samples: int = Field(default=200, ge=1)
    gate_samples: int = Field(default=1000, ge=1)
    gate_accuracy: float = Field(default=0.99, ge=0.0, le=1.0)

    model_config = {"json_schema_serialization_defaults_required": True}


class MultiGenPrompt(BaseModel):
    categories: list[str] = Field(description="Prompted categories in sentence order")
    text: str = Field(description="Rendered prompt")

    model_config = {"json_schema_serialization_defaults_required": True}

    @model_validator(mode="after")
    def _distinct(self) -> MultiGenPrompt:
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"prompt categories must be distinct: {self.categories}")
        return self


class MultiGenSuite(BaseModel):
    """Prompt suite for multi-category instance composition."""

    pool: list[str] = Field(description="Category pool prompts are drawn from")
    seed: int = Field(description="Suite construction seed")
    prompts: list[MultiGenPrompt] = Field(default_factory=list)
    rounds: int = Field(default=10, ge=1)
    images_per_prompt: int = Field(default=1, ge=1)

    model_config = {"json_schema_serialization_defaults_required": True}

    @property
    def suite_hash(self) -> str:
        return content_hash(
            {
                "pool": self.pool,
                "seed": self.seed,
                "prompts": [p.model_dump() for p in self.prompts],
            }
        )


class MGScore(BaseModel):
    mean: float = Field(description="Mean success rate over rounds, percent")
    std: float = Field(description="Population std over rounds, percent")

    model_config = {"json_schema_serialization_defaults_required": True}


class EvalMetadata(BaseModel):
    seed: int
    checkpoint: str
    suite_hash: str
    n_prompts: int
    rounds: int
    sampler: SamplerConfig
    detector_accuracy: float | None = None
    miou_layer: str
    miou_timestep: int
    miou_threshold: float
    miou_tokens: int = 0
    miou_skipped_samples: int = 0

    model_config = {"json_schema_serialization_defaults_required": True}


class EvalReport(BaseModel):
    """Single JSON document produced by an evaluation run."""

    schema_version: Literal["eval-v1"] = Field(default=EVAL_SCHEMA_VERSION)
    mg: dict[str, MGScore] = Field(description="MG2..MG5 mean/std in percent")
    mg_per_round: dict[str, list[float]] = Field(default_factory=dict)
    object_accuracy: float = Field(description="Percent of images with every prompted category")
    attn_miou: float | None = Field(default=None, ge=0.0, le=1.0)
    per_category_success: dict[str, float] | None = Field(
        default=None, description="Optional percent success per category"
    )
    metadata: EvalMetadata

    model_config = {"json_schema_serialization_defaults_required": True}

    @model_validator(mode="after")
    def _monotone(self) -> EvalReport:
        means = [self.mg[k].mean for k in ("MG2", "MG3", "MG4", "MG5") if k in self.mg]
        if any(a < b for a, b in zip(means, means[1:])):
            raise ValueError(f"MG means must be non-increasing: {means}")
        return self

    @property
    def report_hash(self) -> str:
        return content_hash(self.model_dump(mode="json"))


class RunScores(BaseModel):
    """Numbers one trained run contributes to a preset comparison."""

    preset: str
    seed: int
    attn_miou: float | None = None
    mg2: float = Field(description="MG2 mean, percent")
    object_accuracy: float = Field(description="Object accuracy, percent")
    final_denoise: float = Field(description="Mean denoising loss over the last logged steps")

    model_config = {"json_schema_serialization_defaults_required": True}


class CriterionResult(BaseModel):
    name: str
    passed: bool
    detail: str = Field(description="Observed values behind the verdict")

    model_config = {"json_schema_serialization_defaults_required": True}


class ExperimentSummary(BaseModel):
    """Verdicts of a baseline-vs-grounded experiment over one or more seeds."""

    seeds: list[int]
    runs: list[RunScores] = Field(default_factory=list)
    criteria: list[CriterionResult] = Field(default_factory=list)

    model_config = {"json_schema_serialization_defaults_required": True}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.criteria if not c.passed]
