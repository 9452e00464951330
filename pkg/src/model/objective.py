from __future__ import annotations

from collections.abc import Iterable

import torch.nn.functional as F
from torch import Tensor, nn

from src.attention.cross_attention import AttentionRecord
from src.attention.recorder import AttentionRecorder, record_pass
from src.model.schedule import NoiseSchedule


def denoise_loss(
    z0: Tensor,
    text: Tensor,
    t: Tensor,
    noise: Tensor,
    model: nn.Module,
    schedule: NoiseSchedule,
    layer_ids: Iterable[str] | None = None,
) -> tuple[Tensor, dict[str, AttentionRecord]]:
    """Mean squared error between drawn and predicted noise, plus recorded maps.

    ``layer_ids`` defaults to every cross-attention layer of the model.
    """
    z_t = schedule.add_noise(z0, t, noise)
    recorder = AttentionRecorder.for_model(model)
    predicted = model(z_t, t, text, recorder=recorder)
    loss = F.mse_loss(predicted, noise)
    wanted = recorder.available if layer_ids is None else layer_ids
    return loss, record_pass(recorder, wanted)
