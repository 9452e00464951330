from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from src.attention.cross_attention import AttentionRecord
from src.attention.recorder import AttentionRecorder, record_pass
from src.data.render import GroundedSample
from src.data.tensors import image_to_tensor
from src.model.checkpoint import ToyLDM
from src.utils.seeding import torch_generator

logger = logging.getLogger("evaluation.segmentation")


@dataclass
class AttentionMIoU:
    miou: float
    token_ious: list[float]
    per_category: dict[str, float]
    skipped_samples: int
    layer_id: str
    timestep: int
    threshold: float = 0.4
    token_categories: list[str] = field(default_factory=list)


def token_iou(column: Tensor, mask: np.ndarray | Tensor, threshold: float = 0.4) -> float:
    """IoU of a thresholded attention column against a binary mask.

    The column is upsampled bilinearly to mask resolution and kept where it
    reaches ``threshold`` times its maximum.
    """
    target = torch.as_tensor(mask).bool()
    values = column.detach().float()
    if tuple(values.shape) != tuple(target.shape):
        values = F.interpolate(
            values[None, None], size=tuple(target.shape), mode="bilinear", align_corners=False
        )[0, 0]
    peak = values.max()
    predicted = values >= threshold * peak if peak > 0 else torch.zeros_like(target)
    union = (predicted | target).sum()
    if int(union) == 0:
        return 0.0
    return float((predicted & target).sum() / union)


@torch.no_grad()
def read_attention(
    ldm: ToyLDM,
    samples: Sequence[GroundedSample],
    layer_id: str,
    timestep: int | None = None,
    seed: int = 0,
    batch_size: int = 16,
) -> list[AttentionRecord]:
    """Attention of ``layer_id`` for each sample after noising it to ``timestep``.

    Sample i is noised with a generator seeded by (seed, i).
    """
    ldm.config.check_layers([layer_id])
    t_value = timestep if timestep is not None else ldm.schedule.T // 2
    model = ldm.model
    model.eval()
    device = next(model.parameters()).device
    recorder = AttentionRecorder.for_model(model)

    records: list[AttentionRecord] = []
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        images = torch.stack([image_to_tensor(s.image) for s in batch])
        noise = torch.stack(
            [
                torch.randn(images.shape[1:], generator=torch_generator(seed, start + i))
                for i in range(len(batch))
            ]
        )
        t = torch.full((len(batch),), t_value, dtype=torch.long)
        z_t = ldm.schedule.add_noise(images, t, noise).to(device)
        context = ldm.encoder.encode([s.caption for s in batch])
        model(z_t, t.to(device), context, recorder=recorder)
        record = record_pass(recorder, [layer_id])[layer_id].detach()
        records.extend(record.select(i) for i in range(len(batch)))
    return records


def attention_miou(
    ldm: ToyLDM,
    samples: Sequence[GroundedSample],
    layer_id: str = "dec.32",
    timestep: int | None = None,
    threshold: float = 0.4,
    seed: int = 0,
    batch_size: int = 16,
) -> AttentionMIoU:
    """Mean IoU between thresholded token attention and ground-truth masks."""
    t_value = timestep if timestep is not None else ldm.schedule.T // 2
    usable = [s for s in samples if s.groundings]
    skipped = len(samples) - len(usable)
    if skipped:
        logger.warning(f"Skipping {skipped} samples without grounded tokens")
    if not usable:
        raise ValueError("no sample has grounded tokens; attention mIoU is undefined")

    records = read_attention(ldm, usable, layer_id, t_value, seed=seed, batch_size=batch_size)
    ious: list[float] = []
    categories: list[str] = []
    by_category: dict[str, list[float]] = defaultdict(list)
    for sample, record in zip(usable, records):
        for grounding in sample.groundings:
            iou = token_iou(record.column(grounding.token_position), grounding.mask, threshold)
            ious.append(iou)
            categories.append(grounding.category)
            by_category[grounding.category].append(iou)

    return AttentionMIoU(
        miou=float(np.mean(ious)),
        token_ious=ious,
        per_category={k: float(np.mean(v)) for k, v in sorted(by_category.items())},
        skipped_samples=skipped,
        layer_id=layer_id,
        timestep=t_value,
        threshold=threshold,
        token_categories=categories,
    )
