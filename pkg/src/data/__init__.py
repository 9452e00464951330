"""Synthetic compositional scenes and the grounded dataset layout."""

from src.data.dataset import (
    generate_dataset,
    load_dataset,
    read_manifest,
    write_sample,
)
from src.data.registry import (
    DEFAULT_REGISTRY,
    Category,
    CategoryRegistry,
    get_registry,
)
from src.data.render import GroundedSample, Grounding, caption_for, render, sample_scene
from src.data.shapes import SHAPES, shape_mask
from src.data.tensors import collate, grounding_set, image_to_tensor, tensor_to_image

__all__ = [
    "generate_dataset",
    "load_dataset",
    "read_manifest",
    "write_sample",
    "DEFAULT_REGISTRY",
    "Category",
    "CategoryRegistry",
    "get_registry",
    "GroundedSample",
    "Grounding",
    "caption_for",
    "render",
    "sample_scene",
    "SHAPES",
    "shape_mask",
    "collate",
    "grounding_set",
    "image_to_tensor",
    "tensor_to_image",
]
