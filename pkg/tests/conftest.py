from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch

from src.data.dataset import generate_dataset
from src.data.registry import DEFAULT_REGISTRY, CategoryRegistry
from src.data.render import GroundedSample, render, sample_scene
from src.model.checkpoint import ToyLDM, build_toy_ldm
from src.model.schedule import NoiseSchedule
from src.schemas.model import ModelConfig
from src.utils.seeding import numpy_rng


@pytest.fixture
def registry() -> CategoryRegistry:
    return DEFAULT_REGISTRY


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    # full 32x32 layer layout with narrow channels
    return ModelConfig(
        channels=(8, 16, 16),
        num_heads=2,
        head_dim=4,
        text_dim=8,
        time_embed_dim=16,
        norm_groups=4,
        seed=0,
    )


@pytest.fixture
def tiny_ldm(tiny_model_config: ModelConfig, registry: CategoryRegistry) -> ToyLDM:
    return build_toy_ldm(tiny_model_config, registry.words, NoiseSchedule())


@pytest.fixture
def rendered_samples(registry: CategoryRegistry) -> list[GroundedSample]:
    return [
        render(sample_scene(registry, numpy_rng(11, i)), seed=i, registry=registry)
        for i in range(6)
    ]


@pytest.fixture
def dataset_dir(tmp_path: Path, registry: CategoryRegistry) -> Path:
    out = tmp_path / "data"
    generate_dataset(6, registry, seed=3, out_dir=out)
    return out


@pytest.fixture
def float64_rng() -> torch.Generator:
    return torch.Generator().manual_seed(1234)


@pytest.fixture
def np_rng() -> np.random.Generator:
    return np.random.default_rng(7)
