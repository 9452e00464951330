"""Token- and pixel-level grounding objectives."""

from src.losses.grounding import (
    BINARIZE_THRESHOLD,
    PIXEL_CLAMP_EPS,
    LossBreakdown,
    TokenGroundingSet,
    combine_objective,
    downscale_binarize,
    pixel_loss,
    token_loss,
    tokencompose_loss,
)

__all__ = [
    "BINARIZE_THRESHOLD",
    "PIXEL_CLAMP_EPS",
    "LossBreakdown",
    "TokenGroundingSet",
    "combine_objective",
    "downscale_binarize",
    "pixel_loss",
    "token_loss",
    "tokencompose_loss",
]
