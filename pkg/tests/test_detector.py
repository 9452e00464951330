from __future__ import annotations

import numpy as np
import pytest

from src.data.render import render
from src.data.shapes import shape_mask
from src.errors import DetectorGateError
from src.evaluation import oracle_detect, shape_score, validate_detector
from src.schemas.data import DetectorThresholds, ObjectSpec, SceneSpec


def _image(*objects: ObjectSpec) -> np.ndarray:
    return render(SceneSpec(objects=list(objects))).image


class TestOracleDetector:
    def test_blank_canvas(self, registry):
        blank = np.full((32, 32, 3), 255, dtype=np.uint8)
        assert oracle_detect(blank, registry) == set()

    @pytest.mark.parametrize(
        "category",
        ["red circle", "blue square", "green triangle", "yellow ring", "magenta star", "gray crescent"],
    )
    def test_single_object(self, registry, category):
        image = _image(ObjectSpec(category=category, center=(16, 16), size=14))
        assert oracle_detect(image, registry) == {category}

    def test_two_disjoint_objects(self, registry):
        image = _image(
            ObjectSpec(category="red circle", center=(8, 8), size=12),
            ObjectSpec(category="cyan diamond", center=(24, 24), size=12),
        )
        assert oracle_detect(image, registry) == {"red circle", "cyan diamond"}

    def test_tiny_blob_is_ignored(self, registry):
        image = np.full((32, 32, 3), 255, dtype=np.uint8)
        image[4:6, 4:6] = registry.get("red circle").rgb
        assert oracle_detect(image, registry) == set()

    def test_tolerates_mild_noise(self, registry, np_rng):
        image = _image(ObjectSpec(category="blue square", center=(16, 16), size=14))
        noisy = np.clip(image.astype(int) + np_rng.integers(-12, 13, image.shape), 0, 255)
        assert oracle_detect(noisy.astype(np.uint8), registry) == {"blue square"}

    def test_wrong_shape_is_rejected(self, registry):
        # a square block in the circle's color
        image = np.full((32, 32, 3), 255, dtype=np.uint8)
        image[6:26, 6:26] = registry.get("red circle").rgb
        assert "red circle" not in oracle_detect(image, registry)


class TestShapeScore:
    def test_exact_template_scores_one(self):
        component = shape_mask("triangle", (16, 16), 14, (32, 32))
        assert shape_score(component, "triangle") == pytest.approx(1.0)

    def test_empty_component(self):
        assert shape_score(np.zeros((8, 8), dtype=bool), "circle") == 0.0


class TestValidationGate:
    def test_gate_fails_loudly(self, registry):
        blind = DetectorThresholds(min_area=10_000)
        with pytest.raises(DetectorGateError) as info:
            validate_detector(registry, blind, n_scenes=10, required=0.5)
        assert info.value.accuracy == 0.0

    def test_returns_accuracy(self, registry):
        accuracy = validate_detector(registry, n_scenes=20, seed=1)
        assert 0.0 <= accuracy <= 1.0

    @pytest.mark.slow
    def test_default_thresholds_pass_gate(self, registry):
        assert validate_detector(registry, n_scenes=1000, seed=0, required=0.99) >= 0.99
