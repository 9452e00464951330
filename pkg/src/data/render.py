from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from src.data.registry import DEFAULT_REGISTRY, CategoryRegistry
from src.data.shapes import shape_mask
from src.errors import SceneError
from src.schemas.data import ObjectSpec, SceneSpec

logger = logging.getLogger("data.render")

MAX_OBJECTS = 5


@dataclass
class Grounding:
    token_position: int
    category: str
    mask: np.ndarray

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class GroundedSample:
    """Image [H, W, 3] uint8, its caption and one mask per grounded noun token."""

    id: str
    image: np.ndarray
    caption: str
    groundings: list[Grounding] = field(default_factory=list)

    @property
    def categories(self) -> list[str]:
        return [g.category for g in self.groundings]

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.image.shape[0], self.image.shape[1])


def caption_for(categories: list[str]) -> tuple[str, list[int]]:
    """Caption 'a A, a B and a C' plus the word index of each category's noun."""
    words: list[str] = []
    phrases: list[str] = []
    positions: list[int] = []
    for index, category in enumerate(categories):
        if index > 0 and index == len(categories) - 1:
            words.append("and")
        category_words = category.split()
        words.append("a")
        words.extend(category_words)
        positions.append(len(words) - 1)
        phrases.append(f"a {category}")

    if len(phrases) == 1:
        caption = phrases[0]
    else:
        caption = f"{', '.join(phrases[:-1])} and {phrases[-1]}"
    return caption, positions


def _box_inside(obj: ObjectSpec, height: int, width: int) -> bool:
    half = obj.size / 2.0
    x, y = obj.center
    return x - half >= 0 and y - half >= 0 and x + half <= width and y + half <= height


def object_masks(spec: SceneSpec, registry: CategoryRegistry = DEFAULT_REGISTRY) -> list[np.ndarray]:
    """Unoccluded mask of every object, in list order."""
    canvas = (spec.height, spec.width)
    return [
        shape_mask(registry.get(obj.category).shape, obj.center, obj.size, canvas)
        for obj in spec.objects
    ]


def paint_order(spec: SceneSpec) -> list[int]:
    # stable: ties keep list order
    return sorted(range(len(spec.objects)), key=lambda i: spec.objects[i].z_order)


def render(
    spec: SceneSpec,
    seed: int = 0,
    registry: CategoryRegistry = DEFAULT_REGISTRY,
    sample_id: str | None = None,
) -> GroundedSample:
    """Rasterize a scene with exact, occlusion-aware per-object masks.

    Rendering draws no randomness; ``seed`` only names the sample when no id
    is given.
    """
    if not spec.objects:
        raise SceneError("scene has no objects")
    if len(spec.objects) > MAX_OBJECTS:
        raise SceneError(f"scene has {len(spec.objects)} objects; at most {MAX_OBJECTS}")
    categories = [obj.category for obj in spec.objects]
    if len(set(categories)) != len(categories):
        raise SceneError(f"categories within a scene must be distinct: {categories}")
    for obj in spec.objects:
        if obj.category not in registry:
            raise SceneError(f"Unknown category: {obj.category}")
        if not _box_inside(obj, spec.height, spec.width):
            raise SceneError(
                f"{obj.category} at {obj.center} with size {obj.size} leaves the "
                f"{spec.width}x{spec.height} canvas"
            )

    full_masks = object_masks(spec, registry)
    image = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    image[:] = spec.background
    owner = np.full((spec.height, spec.width), -1, dtype=np.int64)
    for index in paint_order(spec):
        mask = full_masks[index]
        image[mask] = registry.get(spec.objects[index].category).rgb
        owner[mask] = index

    caption, positions = caption_for(categories)
    groundings: list[Grounding] = []
    for index, (category, position) in enumerate(zip(categories, positions)):
        visible = owner == index
        if not visible.any():
            raise SceneError(f"{category} is empty or fully occluded")
        groundings.append(Grounding(position, category, visible))

    return GroundedSample(
        id=sample_id if sample_id is not None else f"{seed:06d}",
        image=image,
        caption=caption,
        groundings=groundings,
    )


def sample_scene(
    registry: CategoryRegistry,
    rng: np.random.Generator,
    height: int = 32,
    width: int = 32,
    max_objects: int = MAX_OBJECTS,
    size_range: tuple[int, int] = (10, 14),
    min_visible: float = 0.7,
    max_attempts: int = 500,
) -> SceneSpec:
    """Random scene of 1..max_objects distinct categories.

    Categories are drawn first; placements are redrawn until every object keeps
    at least ``min_visible`` of its pixels.
    """
    max_objects = min(max_objects, len(registry), MAX_OBJECTS)
    count = int(rng.integers(1, max_objects + 1))
    chosen = rng.choice(len(registry), size=count, replace=False)
    names = [registry.names[int(i)] for i in chosen]
    low, high = size_range

    for _ in range(max_attempts):
        objects = []
        for z_order, name in zip(rng.permutation(count), names):
            size = int(rng.integers(low, high + 1))
            half = size / 2.0
            x = int(rng.integers(int(np.ceil(half)), int(np.floor(width - half)) + 1))
            y = int(rng.integers(int(np.ceil(half)), int(np.floor(height - half)) + 1))
            objects.append(ObjectSpec(category=name, center=(x, y), size=size, z_order=int(z_order)))
        spec = SceneSpec(height=height, width=width, objects=objects)
        if _visible_enough(spec, registry, min_visible):
            return spec
    raise SceneError(
        f"no placement of {names} kept {min_visible:.0%} visibility in {max_attempts} attempts"
    )


def _visible_enough(spec: SceneSpec, registry: CategoryRegistry, min_visible: float) -> bool:
    masks = object_masks(spec, registry)
    covered = np.zeros((spec.height, spec.width), dtype=bool)
    visible = [0] * len(masks)
    for index in reversed(paint_order(spec)):
        own = masks[index]
        visible[index] = int((own & ~covered).sum())
        covered |= own
    return all(
        full.sum() > 0 and shown / full.sum() >= min_visible
        for shown, full in zip(visible, masks)
    )
