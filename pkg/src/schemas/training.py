from __future__ import annotations

from pydantic import BaseModel, Field, field_validator, model_validator

DEFAULT_LOSS_LAYERS = ["dec.16a", "dec.16b", "dec.32", "mid.8"]


class LossWeights(BaseModel):
    """Weights of the grounding terms in the joint objective."""

    lambda_token: float = Field(default=1e-3, ge=0.0, description="Weight of L_token")
    gamma_pixel: float = Field(default=5e-5, ge=0.0, description="Weight of L_pixel")
    layer_ids: list[str] = Field(
        default_factory=lambda: list(DEFAULT_LOSS_LAYERS),
        description="Cross-attention layers the grounding terms are applied to",
    )

    model_config = {"json_schema_serialization_defaults_required": True}

    @field_validator("layer_ids")
    @classmethod
    def _sorted_unique(cls, value: list[str]) -> list[str]:
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate layer ids: {value}")
        return sorted(value)

    @model_validator(mode="after")
    def _layers_when_weighted(self) -> LossWeights:
        if (self.lambda_token > 0 or self.gamma_pixel > 0) and not self.layer_ids:
            raise ValueError("layer_ids must be non-empty when a grounding weight is nonzero")
        return self

    @property
    def grounding_enabled(self) -> bool:
        return self.lambda_token > 0 or self.gamma_pixel > 0


class TrainConfig(BaseModel):
    """Optimization settings for one training run."""

    learning_rate: float = Field(
        default=5e-5,
        gt=0.0,
        description="Constant AdamW learning rate",
    )
    weight_decay: float = Field(default=1e-2, ge=0.0, description="AdamW weight decay")
    steps: int = Field(default=2000, ge=1, description="Optimizer steps")
    batch_size: int = Field(
        default=4, ge=1, description="Samples per micro-batch (1 matches the fine-tuning pipeline)"
    )
    grad_accum_steps: int = Field(
        default=4, ge=1, description="Micro-batches accumulated per optimizer step"
    )
    cond_dropout: float = Field(
        default=0.1,
        ge=0.0,
        le=1.0,
        description="Probability of replacing a caption by the null caption",
    )
    loss: LossWeights = Field(default_factory=LossWeights)
    seed: int = Field(default=0, description="Run seed (data order, timesteps, noise)")
    log_every: int = Field(default=10, ge=1, description="Steps between INFO log lines")
    checkpoint_every: int = Field(
        default=500, ge=1, description="Steps between checkpoints"
    )
    eval_every: int = Field(
        default=0, ge=0, description="Steps between held-out evaluations (0 disables them)"
    )
    eval_samples: int = Field(
        default=32, ge=1, description="Held-out samples scored at each evaluation"
    )
    eval_layer: str = Field(default="dec.32", description="Layer read for attention mIoU")

    model_config = {"json_schema_serialization_defaults_required": True}
