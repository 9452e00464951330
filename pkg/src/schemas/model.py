from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from src.errors import ConfigurationError


class ModelConfig(BaseModel):
    """Architecture of the toy text-conditioned denoising U-Net."""

    base_resolution: int = Field(
        default=32, ge=8, description="Image side length h0 = w0 in pixels"
    )
    in_channels: int = Field(default=3, ge=1, description="Image channels c0")
    channels: tuple[int, int, int] = Field(
        default=(32, 64, 128),
        description="Feature widths of the full-, half- and quarter-resolution stages",
    )
    num_heads: int = Field(default=4, ge=1, description="Cross-attention heads H")
    head_dim: int = Field(default=16, ge=1, description="Per-head key width d_k")
    text_dim: int = Field(default=64, ge=1, description="Token embedding width")
    max_tokens: int = Field(default=16, ge=1, description="Padded caption length")
    time_embed_dim: int = Field(default=128, ge=8, description="Timestep embedding width")
    norm_groups: int = Field(default=8, ge=1, description="GroupNorm groups")
    seed: int = Field(default=0, description="Parameter initialization seed")

    model_config = {"json_schema_serialization_defaults_required": True}

    @model_validator(mode="after")
    def _check_shapes(self) -> ModelConfig:
        if self.base_resolution % 4 != 0:
            raise ValueError("base_resolution must be divisible by 4")
        for width in self.channels:
            if width % self.norm_groups != 0:
                raise ValueError(
                    f"channel width {width} not divisible by norm_groups {self.norm_groups}"
                )
        return self

    @property
    def attention_layers(self) -> dict[str, tuple[int, int]]:
        """Cross-attention layer ids in execution order with their spatial shapes."""
        full = self.base_resolution
        half = full // 2
        quarter = full // 4
        return {
            f"enc.{half}": (half, half),
            f"mid.{quarter}": (quarter, quarter),
            f"dec.{half}a": (half, half),
            f"dec.{half}b": (half, half),
            f"dec.{full}": (full, full),
        }

    def layer_group(self, name: str) -> list[str]:
        """Named layer selections used by the layer ablation."""
        enc, mid, dec_a, dec_b, dec_full = self.attention_layers
        groups = {
            "mid-dec": [mid, dec_a, dec_b, dec_full],
            "dec": [dec_a, dec_b, dec_full],
            "enc-mid-dec": [enc, mid, dec_a, dec_b, dec_full],
            "dec-full": [dec_full],
            "all": [enc, mid, dec_a, dec_b, dec_full],
        }
        if name not in groups:
            raise ConfigurationError(
                f"Unknown layer group: {name} (valid: {', '.join(sorted(groups))})"
            )
        return sorted(groups[name])

    def check_layers(self, layer_ids: set[str] | list[str]) -> None:
        available = set(self.attention_layers)
        unknown = sorted(set(layer_ids) - available)
        if unknown:
            raise ConfigurationError(
                f"Unknown cross-attention layer(s) {unknown}; "
                f"available: {sorted(available)}"
            )
