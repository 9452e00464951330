from __future__ import annotations

import logging
import os
import random

import numpy as np
import torch

logger = logging.getLogger("utils.seeding")


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def configure_determinism(enabled: bool) -> None:
    """Force deterministic kernels where torch offers them."""
    if not enabled:
        torch.use_deterministic_algorithms(False)
        return
    os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
    torch.use_deterministic_algorithms(True, warn_only=True)
    torch.backends.cudnn.deterministic = True
    torch.backends.cudnn.benchmark = False
    logger.info("Deterministic kernels enabled")


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of integers (run seed, round, index, ...)."""
    sequence = np.random.SeedSequence([int(p) for p in parts])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> 1)


def torch_generator(*parts: int) -> torch.Generator:
    generator = torch.Generator(device="cpu")
    generator.manual_seed(derive_seed(*parts))
    return generator


def numpy_rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng([int(p) for p in parts])
