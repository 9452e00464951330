"""Seeding, hashing and file helpers."""

from src.utils.files import (
    append_jsonl,
    atomic_write_bytes,
    atomic_write_text,
    canonical_json,
    content_hash,
    read_jsonl,
    write_json,
)
from src.utils.seeding import (
    configure_determinism,
    derive_seed,
    numpy_rng,
    seed_everything,
    torch_generator,
)

__all__ = [
    "append_jsonl",
    "atomic_write_bytes",
    "atomic_write_text",
    "canonical_json",
    "content_hash",
    "read_jsonl",
    "write_json",
    "configure_determinism",
    "derive_seed",
    "numpy_rng",
    "seed_everything",
    "torch_generator",
]
