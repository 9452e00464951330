from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import torch
from torch import Tensor, nn
from tqdm import tqdm

from src.attention.recorder import AttentionRecorder
from src.model.schedule import NoiseSchedule
from src.model.text_encoder import ToyTextEncoder
from src.schemas.evaluation import SamplerConfig
from src.utils.seeding import torch_generator

logger = logging.getLogger("model.sampler")


def timestep_subsequence(T: int, steps: int) -> list[int]:
    """Descending, evenly spaced timesteps in [1, T] (always including T)."""
    if not 1 <= steps <= T:
        raise ValueError(f"steps must lie in [1, {T}], got {steps}")
    grid = np.unique(np.round(np.linspace(1, T, steps)).astype(int))
    return [int(t) for t in grid[::-1]]


def _device(model: nn.Module) -> torch.device:
    for tensor in model.parameters():
        return tensor.device
    return torch.device("cpu")


def guided_noise(
    model: nn.Module,
    z_t: Tensor,
    t: Tensor,
    cond: Tensor,
    uncond: Tensor,
    guidance_scale: float,
    recorder: AttentionRecorder | None = None,
) -> Tensor:
    """eps_u + s * (eps_c - eps_u); one conditional pass only when s == 1."""
    if guidance_scale == 1.0:
        return model(z_t, t, cond, recorder=recorder)
    batch = z_t.shape[0]
    eps = model(
        torch.cat([z_t, z_t]), torch.cat([t, t]), torch.cat([uncond, cond]), recorder=None
    )
    eps_uncond, eps_cond = eps[:batch], eps[batch:]
    return eps_uncond + guidance_scale * (eps_cond - eps_uncond)


@torch.no_grad()
def sample(
    model: nn.Module,
    encoder: ToyTextEncoder,
    schedule: NoiseSchedule,
    captions: Sequence[str],
    seeds: Sequence[int],
    config: SamplerConfig | None = None,
    progress: bool = False,
) -> Tensor:
    """Generate one image per caption, [B, C, H, W] in [-1, 1].

    Item i draws all of its noise from a generator seeded by ``seeds[i]``, so
    its output does not depend on which other captions share the batch.
    """
    config = config or SamplerConfig()
    if len(captions) != len(seeds):
        raise ValueError(f"{len(captions)} captions but {len(seeds)} seeds")
    if config.guidance_scale != 1.0 and int(getattr(model, "null_condition_samples", 1)) == 0:
        logger.warning(
            "Guidance requested but the model never saw null conditioning during training; "
            "the unconditional branch is untrained"
        )

    model_config = model.config
    shape = (model_config.in_channels, model_config.base_resolution, model_config.base_resolution)
    device = _device(model)
    generators = [torch_generator(seed) for seed in seeds]
    z = torch.stack([torch.randn(shape, generator=g) for g in generators]).to(device)

    cond = encoder.encode(list(captions)).to(device)
    uncond = encoder.null_context(len(captions)).to(device)
    timesteps = timestep_subsequence(schedule.T, config.steps)
    stochastic = config.sampler == "ancestral" or config.eta > 0

    iterator = tqdm(timesteps, desc="sampling", leave=False) if progress else timesteps
    for index, t in enumerate(iterator):
        t_prev = timesteps[index + 1] if index + 1 < len(timesteps) else 0
        t_batch = torch.full((len(captions),), t, dtype=torch.long, device=device)
        eps = guided_noise(model, z, t_batch, cond, uncond, config.guidance_scale)

        ab_t = float(schedule.alpha_bars[t])
        ab_prev = float(schedule.alpha_bars[t_prev])
        x0 = schedule.predict_x0(z, t, eps).clamp(-1.0, 1.0)

        if config.sampler == "ancestral":
            beta = 1.0 - ab_t / ab_prev
            mean = (
                (ab_prev**0.5 * beta / (1.0 - ab_t)) * x0
                + ((ab_t / ab_prev) ** 0.5 * (1.0 - ab_prev) / (1.0 - ab_t)) * z
            )
            sigma = (beta * (1.0 - ab_prev) / (1.0 - ab_t)) ** 0.5
            z = mean
        else:
            sigma = config.eta * (
                ((1.0 - ab_prev) / (1.0 - ab_t)) * (1.0 - ab_t / ab_prev)
            ) ** 0.5
            direction = max(1.0 - ab_prev - sigma**2, 0.0) ** 0.5
            z = ab_prev**0.5 * x0 + direction * schedule.predict_eps(z, t, x0)

        if stochastic and t_prev > 0 and sigma > 0:
            noise = torch.stack([torch.randn(shape, generator=g) for g in generators])
            z = z + sigma * noise.to(device)

    return z.clamp(-1.0, 1.0)
