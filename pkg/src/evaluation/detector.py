from __future__ import annotations

import logging

import numpy as np
from scipy import ndimage

from src.data.registry import BACKGROUND_RGB, CategoryRegistry
from src.data.render import render, sample_scene
from src.data.shapes import shape_mask
from src.errors import DetectorGateError
from src.schemas.data import DetectorThresholds
from src.utils.seeding import numpy_rng

logger = logging.getLogger("evaluation.detector")

TEMPLATE_SCALES = (1.0, 1.15, 1.3)
_ANCHORS = ("center", "top-left", "top-right", "bottom-left", "bottom-right")


def _anchored_center(
    anchor: str, box: tuple[int, int, int, int], size: float
) -> tuple[float, float]:
    x0, y0, x1, y1 = box
    half = size / 2.0
    if anchor == "center":
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    x = x0 + half if anchor.endswith("left") else x1 - half
    y = y0 + half if anchor.startswith("top") else y1 - half
    return (x, y)


def shape_score(component: np.ndarray, shape: str, dilation: int = 1) -> float:
    """Best fraction of component pixels inside a template fitted to its box.

    Templates are tried at a few scales, anchored at the box center and corners
    so that partly occluded objects still fit.
    """
    ys, xs = np.nonzero(component)
    if xs.size == 0:
        return 0.0
    box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    base = max(box[2] - box[0], box[3] - box[1])
    area = float(xs.size)

    best = 0.0
    for scale in TEMPLATE_SCALES:
        size = base * scale
        for anchor in _ANCHORS:
            template = shape_mask(shape, _anchored_center(anchor, box, size), size, component.shape)
            if dilation:
                template = ndimage.binary_dilation(template, iterations=dilation)
            best = max(best, float((component & template).sum()) / area)
    return best


def oracle_detect(
    image: np.ndarray,
    registry: CategoryRegistry,
    thresholds: DetectorThresholds | None = None,
) -> set[str]:
    """Categories present in a uint8 [H, W, 3] image.

    Pixels are assigned to the nearest registry or background color; each
    category's connected components must pass area, mean-color and shape checks.
    Ambiguous components are not reported.
    """
    thresholds = thresholds or DetectorThresholds()
    pixels = image.astype(np.float64)
    palette = np.array([c.rgb for c in registry] + [BACKGROUND_RGB], dtype=np.float64)
    distance = np.linalg.norm(pixels[:, :, None, :] - palette[None, None], axis=-1)
    nearest = distance.argmin(axis=-1)
    close = distance.min(axis=-1) <= thresholds.color_tolerance

    detected: set[str] = set()
    for index, category in enumerate(registry):
        region = (nearest == index) & close
        if not region.any():
            continue
        labels, count = ndimage.label(region)
        for label in range(1, count + 1):
            component = labels == label
            if int(component.sum()) < thresholds.min_area:
                continue
            mean_color = pixels[component].mean(axis=0)
            if np.linalg.norm(mean_color - palette[index]) > thresholds.color_tolerance:
                continue
            score = shape_score(component, category.shape, thresholds.template_dilation)
            if score >= thresholds.shape_score:
                detected.add(category.name)
                break
    return detected


def validate_detector(
    registry: CategoryRegistry,
    thresholds: DetectorThresholds | None = None,
    n_scenes: int = 1000,
    seed: int = 0,
    resolution: int = 32,
    required: float | None = None,
) -> float:
    """Exact-set detection accuracy over clean rendered scenes.

    Raises DetectorGateError when ``required`` is given and not met.
    """
    correct = 0
    for index in range(n_scenes):
        spec = sample_scene(registry, numpy_rng(seed, index), height=resolution, width=resolution)
        sample = render(spec, seed=index, registry=registry)
        found = oracle_detect(sample.image, registry, thresholds)
        if found == set(sample.categories):
            correct += 1
        else:
            logger.debug(f"scene {index}: expected {sorted(sample.categories)}, got {sorted(found)}")
    accuracy = correct / n_scenes
    logger.info(f"Oracle detector accuracy {accuracy:.4f} on {n_scenes} clean scenes")
    if required is not None and accuracy < required:
        raise DetectorGateError(accuracy, required)
    return accuracy
