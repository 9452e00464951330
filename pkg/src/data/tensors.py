from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import torch
from torch import Tensor

from src.data.render import GroundedSample
from src.losses.grounding import TokenGroundingSet


def image_to_tensor(image: np.ndarray) -> Tensor:
    """uint8 [H, W, 3] -> float [3, H, W] in [-1, 1]."""
    return torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float() / 127.5 - 1.0


def tensor_to_image(x: Tensor) -> np.ndarray:
    """float [3, H, W] in [-1, 1] -> uint8 [H, W, 3]."""
    scaled = ((x.detach().cpu().clamp(-1.0, 1.0) + 1.0) * 127.5).round()
    return scaled.to(torch.uint8).permute(1, 2, 0).numpy()


def grounding_set(sample: GroundedSample) -> TokenGroundingSet:
    if not sample.groundings:
        return TokenGroundingSet.empty(sample.resolution)
    return TokenGroundingSet(
        positions=[g.token_position for g in sample.groundings],
        masks=torch.from_numpy(np.stack([g.mask for g in sample.groundings])).float(),
        categories=sample.categories,
    )


def collate(
    samples: Sequence[GroundedSample],
) -> tuple[Tensor, list[str], list[TokenGroundingSet]]:
    images = torch.stack([image_to_tensor(s.image) for s in samples])
    return images, [s.caption for s in samples], [grounding_set(s) for s in samples]
