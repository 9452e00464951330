"""Toy text-conditioned denoising diffusion model operating on pixels."""

from src.model.checkpoint import (
    CHECKPOINT_HEADER,
    LoadedCheckpoint,
    ToyLDM,
    build_toy_ldm,
    load_checkpoint,
    save_checkpoint,
)
from src.model.objective import denoise_loss
from src.model.sampler import guided_noise, sample, timestep_subsequence
from src.model.schedule import NoiseSchedule
from src.model.text_encoder import PAD_TOKEN, UNK_TOKEN, ToyTextEncoder, tokenize
from src.model.unet import ToyUNet

__all__ = [
    "CHECKPOINT_HEADER",
    "LoadedCheckpoint",
    "ToyLDM",
    "build_toy_ldm",
    "load_checkpoint",
    "save_checkpoint",
    "denoise_loss",
    "guided_noise",
    "sample",
    "timestep_subsequence",
    "NoiseSchedule",
    "PAD_TOKEN",
    "UNK_TOKEN",
    "ToyTextEncoder",
    "tokenize",
    "ToyUNet",
]
