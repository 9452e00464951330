from __future__ import annotations

import numpy as np
from matplotlib.path import Path

ANALYTIC_SHAPES = ("circle", "ring", "crescent")
POLYGON_SHAPES = ("square", "triangle", "cross", "bar", "diamond", "star", "pentagon")
SHAPES = ANALYTIC_SHAPES + POLYGON_SHAPES

RING_INNER_RADIUS = 0.5
CRESCENT_OFFSET = 0.6
CRESCENT_BITE_RADIUS = 0.75


def _fit_unit_box(vertices: np.ndarray) -> np.ndarray:
    low = vertices.min(axis=0)
    high = vertices.max(axis=0)
    return (vertices - low) / (high - low) * 2.0 - 1.0


def _regular(points: int, inner: float | None = None) -> np.ndarray:
    count = points * 2 if inner is not None else points
    angles = -np.pi / 2 + np.arange(count) * (2 * np.pi / count)
    radii = np.ones(count)
    if inner is not None:
        radii[1::2] = inner
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


_ARM = 0.35

# Unit-box outlines with y pointing down.
POLYGONS: dict[str, np.ndarray] = {
    "square": np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float),
    "triangle": np.array([[0, -1], [1, 1], [-1, 1]], dtype=float),
    "cross": np.array(
        [
            [-_ARM, -1], [_ARM, -1], [_ARM, -_ARM], [1, -_ARM], [1, _ARM], [_ARM, _ARM],
            [_ARM, 1], [-_ARM, 1], [-_ARM, _ARM], [-1, _ARM], [-1, -_ARM], [-_ARM, -_ARM],
        ],
        dtype=float,
    ),
    "bar": np.array([[-1, -1 / 3], [1, -1 / 3], [1, 1 / 3], [-1, 1 / 3]], dtype=float),
    "diamond": np.array([[0, -1], [1, 0], [0, 1], [-1, 0]], dtype=float),
    "star": _fit_unit_box(_regular(5, inner=0.45)),
    "pentagon": _fit_unit_box(_regular(5)),
}


def pixel_centers(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    return xs + 0.5, ys + 0.5


def shape_mask(
    shape: str,
    center: tuple[float, float],
    size: float,
    canvas: tuple[int, int],
) -> np.ndarray:
    """Boolean [H, W] mask of pixels whose centers fall inside the shape.

    The shape fills the square box of side ``size`` centred on ``center``
    (continuous (x, y) coordinates, pixel j spanning [j, j + 1]).
    """
    if size <= 0:
        raise ValueError(f"size must be positive, got {size}")
    height, width = canvas
    xs, ys = pixel_centers(height, width)
    half = size / 2.0
    u = (xs - center[0]) / half
    v = (ys - center[1]) / half

    if shape == "circle":
        return u**2 + v**2 <= 1.0
    if shape == "ring":
        r2 = u**2 + v**2
        return (r2 <= 1.0) & (r2 >= RING_INNER_RADIUS**2)
    if shape == "crescent":
        bite = (u - CRESCENT_OFFSET) ** 2 + v**2 < CRESCENT_BITE_RADIUS**2
        return (u**2 + v**2 <= 1.0) & ~bite
    if shape in POLYGONS:
        outline = Path(POLYGONS[shape])
        points = np.stack([u.ravel(), v.ravel()], axis=1)
        return outline.contains_points(points).reshape(height, width)
    raise ValueError(f"Unknown shape: {shape} (known: {', '.join(SHAPES)})")
