from __future__ import annotations

import io
import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import torch

from src.errors import CheckpointError
from src.model.schedule import NoiseSchedule
from src.model.text_encoder import TEMPLATE_WORDS, ToyTextEncoder
from src.model.unet import ToyUNet
from src.schemas.model import ModelConfig
from src.utils.files import atomic_write_bytes

CHECKPOINT_HEADER = "tokencompose-toy-v1"

logger = logging.getLogger("model.checkpoint")


@dataclass
class ToyLDM:
    """Denoiser, frozen text encoder and noise schedule that belong together."""

    model: ToyUNet
    encoder: ToyTextEncoder
    schedule: NoiseSchedule

    @property
    def config(self) -> ModelConfig:
        return self.model.config

    def to(self, device: torch.device | str) -> ToyLDM:
        self.model.to(device)
        self.encoder.to(device)
        return self


@dataclass
class LoadedCheckpoint:
    ldm: ToyLDM
    step: int
    optimizer_state: dict[str, Any] | None
    train_config: dict[str, Any] | None
    path: Path


def build_toy_ldm(
    config: ModelConfig,
    words: Iterable[str],
    schedule: NoiseSchedule | None = None,
) -> ToyLDM:
    """Fresh model; ``words`` are the category words the encoder must know."""
    encoder = ToyTextEncoder(
        [*words, *TEMPLATE_WORDS],
        dim=config.text_dim,
        max_tokens=config.max_tokens,
        seed=config.seed,
    )
    return ToyLDM(ToyUNet(config), encoder, schedule or NoiseSchedule())


def save_checkpoint(
    path: Path,
    ldm: ToyLDM,
    step: int,
    optimizer: torch.optim.Optimizer | None = None,
    train_config: dict[str, Any] | None = None,
) -> Path:
    payload = {
        "header": CHECKPOINT_HEADER,
        "model_config": ldm.config.model_dump(mode="json"),
        "schedule": ldm.schedule.to_dict(),
        "vocabulary": list(ldm.encoder.vocabulary),
        "model_state": ldm.model.state_dict(),
        "encoder_state": ldm.encoder.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "step": step,
        "train_config": train_config,
    }
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Saved checkpoint at step {step} to {path}")
    return path


def load_checkpoint(path: Path, map_location: str | torch.device = "cpu") -> LoadedCheckpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Could not read checkpoint {path}: {e}") from e

    header = payload.get("header") if isinstance(payload, dict) else None
    if header != CHECKPOINT_HEADER:
        raise CheckpointError(
            f"{path}: unsupported checkpoint header {header!r} (expected {CHECKPOINT_HEADER!r})"
        )
    try:
        config = ModelConfig.model_validate(payload["model_config"])
        schedule = NoiseSchedule.from_dict(payload["schedule"])
        encoder = ToyTextEncoder(
            payload["vocabulary"],
            dim=config.text_dim,
            max_tokens=config.max_tokens,
            seed=config.seed,
        )
        encoder.load_state_dict(payload["encoder_state"])
        model = ToyUNet(config)
        model.load_state_dict(payload["model_state"])
    except (KeyError, RuntimeError, ValueError) as e:
        raise CheckpointError(f"{path}: malformed checkpoint: {e}") from e

    return LoadedCheckpoint(
        ldm=ToyLDM(model, encoder, schedule).to(map_location),
        step=int(payload.get("step", 0)),
        optimizer_state=payload.get("optimizer_state"),
        train_config=payload.get("train_config"),
        path=path.resolve(),
    )
