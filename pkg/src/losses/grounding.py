from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import torch
import torch.nn.functional as F
from torch import Tensor

from src.attention.cross_attention import AttentionRecord
from src.errors import ConfigurationError, ShapeMismatchError
from src.schemas.training import LossWeights

logger = logging.getLogger("losses.grounding")

BINARIZE_THRESHOLD = 0.5
PIXEL_CLAMP_EPS = 1e-7


def _check_binary(mask: Tensor, what: str = "mask") -> None:
    if mask.dim() < 2 or min(mask.shape[-2:]) < 1:
        raise ShapeMismatchError(f"{what} must have spatial dims >= 1, got {tuple(mask.shape)}")
    if mask.numel() and not torch.all((mask == 0) | (mask == 1)):
        raise ValueError(f"{what} must contain only 0 and 1")


def downscale_binarize(mask: Tensor, target: tuple[int, int]) -> Tensor:
    """Bilinear downscale of a binary mask ([H, W] or [N, H, W]) followed by >= 0.5."""
    if mask.dim() not in (2, 3):
        raise ShapeMismatchError(f"expected [H, W] or [N, H, W] mask, got {tuple(mask.shape)}")
    _check_binary(mask)
    height, width = mask.shape[-2:]
    target_h, target_w = target
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target {target} must be positive")
    if target_h > height or target_w > width:
        raise ValueError(
            f"cannot upscale a mask from {(height, width)} to {target}; only downscaling is defined"
        )

    dtype = mask.dtype if mask.dtype.is_floating_point else torch.float32
    source = mask.to(dtype)
    if (target_h, target_w) == (height, width):
        return (source >= BINARIZE_THRESHOLD).to(dtype)

    flat = source.reshape(-1, 1, height, width)
    resized = F.interpolate(
        flat, size=(target_h, target_w), mode="bilinear", align_corners=False, antialias=False
    )
    return (resized >= BINARIZE_THRESHOLD).to(dtype).reshape(*mask.shape[:-2], target_h, target_w)


@dataclass
class TokenGroundingSet:
    """Grounded token positions with one binary mask each ([N, H, W])."""

    positions: list[int]
    masks: Tensor
    categories: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(set(self.positions)) != len(self.positions):
            raise ValueError(f"token positions must be distinct: {self.positions}")
        if self.masks.dim() != 3 or self.masks.shape[0] != len(self.positions):
            raise ShapeMismatchError(
                f"{len(self.positions)} positions need masks of shape [N, H, W], "
                f"got {tuple(self.masks.shape)}"
            )
        _check_binary(self.masks, "grounding masks")

    @classmethod
    def empty(cls, resolution: tuple[int, int]) -> TokenGroundingSet:
        return cls(positions=[], masks=torch.zeros(0, *resolution))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.masks.shape[-2], self.masks.shape[-1])

    def resized(self, target: tuple[int, int]) -> TokenGroundingSet:
        if len(self) == 0:
            return TokenGroundingSet.empty(target)
        return TokenGroundingSet(
            positions=list(self.positions),
            masks=downscale_binarize(self.masks, target),
            categories=list(self.categories),
        )

    def to(self, device: torch.device | str) -> TokenGroundingSet:
        return TokenGroundingSet(list(self.positions), self.masks.to(device), list(self.categories))


def _grounded_columns(
    maps: AttentionRecord, grounding: TokenGroundingSet
) -> tuple[Tensor, Tensor]:
    """Token columns [N, h*w] and flattened masks [N, h*w] at matching dtype."""
    if maps.batched:
        raise ShapeMismatchError(
            f"{maps.layer_id}: per-sample losses need an unbatched record; use select()"
        )
    if grounding.resolution != tuple(maps.spatial_shape):
        raise ShapeMismatchError(
            f"{maps.layer_id}: masks at {grounding.resolution} but attention at "
            f"{tuple(maps.spatial_shape)}; resize with downscale_binarize first"
        )
    out_of_range = [p for p in grounding.positions if not 0 <= p < maps.num_tokens]
    if out_of_range:
        raise ShapeMismatchError(
            f"{maps.layer_id}: token positions {out_of_range} outside {maps.num_tokens} tokens"
        )
    columns = maps.map[:, grounding.positions].transpose(0, 1)
    masks = grounding.masks.reshape(len(grounding), -1).to(device=columns.device, dtype=columns.dtype)
    return columns, masks


def token_loss(maps: AttentionRecord, grounding: TokenGroundingSet) -> Tensor:
    """Mean over grounded tokens of (1 - inside-mask mass / total mass)^2."""
    if len(grounding) == 0:
        logger.warning(f"{maps.layer_id}: no grounded tokens; token loss is 0")
        return maps.map.new_zeros(())
    columns, masks = _grounded_columns(maps, grounding)
    inside = (columns * masks).sum(dim=-1)
    total = columns.sum(dim=-1).clamp_min(torch.finfo(columns.dtype).tiny)
    return ((1.0 - inside / total) ** 2).mean()


def pixel_loss(
    maps: AttentionRecord, grounding: TokenGroundingSet, eps: float = PIXEL_CLAMP_EPS
) -> Tensor:
    """Binary cross-entropy between attention and mask, mean over tokens x positions."""
    if len(grounding) == 0:
        logger.warning(f"{maps.layer_id}: no grounded tokens; pixel loss is 0")
        return maps.map.new_zeros(())
    columns, masks = _grounded_columns(maps, grounding)
    probs = columns.clamp(eps, 1.0 - eps)
    return -(masks * torch.log(probs) + (1.0 - masks) * torch.log1p(-probs)).mean()


@dataclass
class LossBreakdown:
    denoise: float
    token_per_layer: dict[str, float]
    pixel_per_layer: dict[str, float]
    total: float

    def to_record(self, step: int) -> dict[str, Any]:
        return {
            "step": step,
            "denoise": self.denoise,
            "token_per_layer": dict(self.token_per_layer),
            "pixel_per_layer": dict(self.pixel_per_layer),
            "total": self.total,
        }

    @property
    def finite(self) -> bool:
        values = [self.denoise, self.total, *self.token_per_layer.values(), *self.pixel_per_layer.values()]
        return all(torch.isfinite(torch.tensor(values)).tolist())


def combine_objective(
    denoise: Tensor | float,
    token_per_layer: Mapping[str, Tensor | float],
    pixel_per_layer: Mapping[str, Tensor | float],
    weights: LossWeights,
) -> Tensor:
    """denoise + sum over layers of (lambda * L_token + gamma * L_pixel).

    Zero-weighted terms are left out entirely so that the total equals the
    denoising loss bit for bit in the plain-LDM ablation.
    """
    total = denoise if isinstance(denoise, Tensor) else torch.tensor(float(denoise))
    for layer_id in weights.layer_ids:
        if weights.lambda_token > 0:
            total = total + weights.lambda_token * token_per_layer[layer_id]
        if weights.gamma_pixel > 0:
            total = total + weights.gamma_pixel * pixel_per_layer[layer_id]
    return total


def _layer_terms(
    record: AttentionRecord,
    grounding: TokenGroundingSet | Sequence[TokenGroundingSet],
) -> tuple[Tensor, Tensor]:
    if not record.batched:
        if not isinstance(grounding, TokenGroundingSet):
            raise ShapeMismatchError(f"{record.layer_id}: unbatched record needs one grounding set")
        resized = grounding.resized(record.spatial_shape)
        return token_loss(record, resized), pixel_loss(record, resized)

    groundings = [grounding] if isinstance(grounding, TokenGroundingSet) else list(grounding)
    if len(groundings) != record.map.shape[0]:
        raise ShapeMismatchError(
            f"{record.layer_id}: {len(groundings)} grounding sets for batch of {record.map.shape[0]}"
        )
    token_terms: list[Tensor] = []
    pixel_terms: list[Tensor] = []
    for index, sample_grounding in enumerate(groundings):
        if len(sample_grounding) == 0:
            continue
        sample = record.select(index)
        resized = sample_grounding.resized(record.spatial_shape)
        token_terms.append(token_loss(sample, resized))
        pixel_terms.append(pixel_loss(sample, resized))
    if not token_terms:
        logger.warning(f"{record.layer_id}: no grounded tokens in batch; grounding terms are 0")
        zero = record.map.new_zeros(())
        return zero, zero
    return torch.stack(token_terms).mean(), torch.stack(pixel_terms).mean()


def tokencompose_loss(
    denoise_loss: Tensor,
    per_layer_maps: Mapping[str, AttentionRecord],
    grounding: TokenGroundingSet | Sequence[TokenGroundingSet],
    weights: LossWeights,
) -> tuple[Tensor, LossBreakdown]:
    """Joint objective: denoising loss plus weighted grounding terms per layer.

    Masks in ``grounding`` are at full image resolution and are resized to each
    layer's grid here.
    """
    missing = [layer_id for layer_id in weights.layer_ids if layer_id not in per_layer_maps]
    if missing:
        raise ConfigurationError(
            f"Attention maps missing for loss layer(s) {missing}; "
            f"recorded: {sorted(per_layer_maps)}"
        )

    token_terms: dict[str, Tensor] = {}
    pixel_terms: dict[str, Tensor] = {}
    for layer_id in weights.layer_ids:
        token_terms[layer_id], pixel_terms[layer_id] = _layer_terms(
            per_layer_maps[layer_id], grounding
        )

    total = combine_objective(denoise_loss, token_terms, pixel_terms, weights)
    breakdown = LossBreakdown(
        denoise=float(denoise_loss.detach()),
        token_per_layer={k: float(v.detach()) for k, v in token_terms.items()},
        pixel_per_layer={k: float(v.detach()) for k, v in pixel_terms.items()},
        total=float(total.detach()),
    )
    return total, breakdown
