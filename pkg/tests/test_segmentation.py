from __future__ import annotations

import numpy as np
import pytest
import torch

from src.data.render import GroundedSample
from src.errors import ConfigurationError
from src.evaluation import attention_miou, read_attention, token_iou


def _block(size: int, start: int, stop: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    mask[start:stop, start:stop] = True
    return mask


class TestTokenIoU:
    def test_proportional_attention(self):
        mask = _block(32, 8, 20)
        column = torch.from_numpy(mask).float() * 0.02
        assert token_iou(column, mask) == pytest.approx(1.0)

    def test_uniform_attention_gives_coverage(self):
        mask = _block(32, 0, 16)
        column = torch.full((32, 32), 1.0 / 1024)
        assert token_iou(column, mask) == pytest.approx(mask.mean())

    def test_scale_invariant(self, float64_rng):
        mask = _block(32, 4, 18)
        column = torch.rand(32, 32, generator=float64_rng)
        assert token_iou(column * 7.0, mask) == pytest.approx(token_iou(column, mask))

    def test_zero_attention(self):
        assert token_iou(torch.zeros(32, 32), _block(32, 4, 10)) == 0.0

    def test_upsamples_low_resolution_columns(self):
        mask = _block(32, 8, 24)
        column = torch.from_numpy(_block(16, 4, 12)).float()
        assert token_iou(column, mask) == pytest.approx(1.0)

    def test_threshold(self):
        mask = _block(4, 0, 2)
        column = torch.tensor([[1.0, 1.0, 0.3, 0.3]] * 4)
        # columns 0-1 pass 0.4 of the peak in every row
        assert token_iou(column, mask, threshold=0.4) == pytest.approx(0.5)
        assert token_iou(column, mask, threshold=0.25) == pytest.approx(0.25)


class TestAttentionMIoU:
    def test_range_and_bookkeeping(self, tiny_ldm, rendered_samples):
        result = attention_miou(tiny_ldm, rendered_samples, layer_id="dec.32", seed=1)
        tokens = sum(len(s.groundings) for s in rendered_samples)
        assert 0.0 <= result.miou <= 1.0
        assert len(result.token_ious) == len(result.token_categories) == tokens
        assert result.timestep == tiny_ldm.schedule.T // 2
        assert result.skipped_samples == 0
        assert set(result.per_category) == {g.category for s in rendered_samples for g in s.groundings}

    def test_deterministic(self, tiny_ldm, rendered_samples):
        a = attention_miou(tiny_ldm, rendered_samples, seed=3, batch_size=2)
        b = attention_miou(tiny_ldm, rendered_samples, seed=3, batch_size=2)
        assert a.token_ious == b.token_ious

    def test_skips_ungrounded_samples(self, tiny_ldm, rendered_samples, caplog):
        bare = GroundedSample(
            id="bare", image=rendered_samples[0].image, caption="a photo", groundings=[]
        )
        with caplog.at_level("WARNING", logger="evaluation.segmentation"):
            result = attention_miou(tiny_ldm, [*rendered_samples[:2], bare], timestep=100)
        assert result.skipped_samples == 1
        assert result.timestep == 100
        assert "Skipping 1 samples" in caplog.text

    def test_nothing_usable(self, tiny_ldm, rendered_samples):
        bare = GroundedSample(id="bare", image=rendered_samples[0].image, caption="", groundings=[])
        with pytest.raises(ValueError):
            attention_miou(tiny_ldm, [bare])

    def test_low_resolution_layer(self, tiny_ldm, rendered_samples):
        result = attention_miou(tiny_ldm, rendered_samples[:2], layer_id="mid.8")
        assert 0.0 <= result.miou <= 1.0

    def test_unknown_layer(self, tiny_ldm, rendered_samples):
        with pytest.raises(ConfigurationError):
            read_attention(tiny_ldm, rendered_samples, "dec.64")

    def test_records_are_distributions(self, tiny_ldm, rendered_samples):
        records = read_attention(tiny_ldm, rendered_samples[:3], "dec.16a")
        assert len(records) == 3
        for record in records:
            assert record.spatial_shape == (16, 16)
            assert torch.allclose(record.map.sum(-1), torch.ones(256), atol=1e-5)
