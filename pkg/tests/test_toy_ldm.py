from __future__ import annotations

import logging

import pytest
import torch
from torch import nn

from src.errors import CheckpointError, ConfigurationError, ShapeMismatchError
from src.model import (
    CHECKPOINT_HEADER,
    NoiseSchedule,
    ToyTextEncoder,
    build_toy_ldm,
    denoise_loss,
    load_checkpoint,
    sample,
    save_checkpoint,
    timestep_subsequence,
    tokenize,
)
from src.schemas.evaluation import SamplerConfig
from src.schemas.model import ModelConfig
from src.utils.seeding import torch_generator


class _EchoNoise(nn.Module):
    """Predicts exactly the noise it was constructed with."""

    attention_layer_ids: tuple[str, ...] = ()

    def __init__(self, noise: torch.Tensor) -> None:
        super().__init__()
        self.noise = noise

    def forward(self, z_t, t, context, recorder=None):
        return self.noise


class _Zeros(nn.Module):
    attention_layer_ids: tuple[str, ...] = ()

    def forward(self, z_t, t, context, recorder=None):
        return torch.zeros_like(z_t)


class _ConstantNoise(nn.Module):
    """Predicts the same large noise everywhere, so x0 estimates saturate."""

    def __init__(self, config: ModelConfig, value: float) -> None:
        super().__init__()
        self.config = config
        self.value = value
        self.anchor = nn.Parameter(torch.zeros(1))

    def forward(self, z_t, t, context, recorder=None):
        return torch.full_like(z_t, self.value)


class TestNoiseSchedule:
    def test_sanity(self):
        schedule = NoiseSchedule()
        assert schedule.T == 1000
        first, last = schedule.alpha_bar(1).item(), schedule.alpha_bar(1000).item()
        assert 0 < last < first < 1
        assert torch.all(schedule.alpha_bars[1:] < schedule.alpha_bars[:-1])

    def test_t_zero_is_identity(self):
        z0 = torch.randn(2, 3, 4, 4)
        assert torch.allclose(NoiseSchedule().add_noise(z0, 0, torch.randn_like(z0)), z0)

    def test_zero_noise(self):
        schedule = NoiseSchedule()
        z0 = torch.randn(3, 4, 4, dtype=torch.float64)
        expected = schedule.alpha_bar(500).sqrt() * z0
        assert torch.allclose(schedule.add_noise(z0, 500, torch.zeros_like(z0)), expected)

    def test_inversion_round_trip(self):
        schedule = NoiseSchedule()
        z0 = torch.randn(4, 3, 8, 8, dtype=torch.float64)
        noise = torch.randn_like(z0)
        t = torch.tensor([1, 10, 500, 1000])
        z_t = schedule.add_noise(z0, t, noise)
        recovered = schedule.predict_x0(z_t, t, noise)
        assert torch.allclose(recovered, z0, atol=1e-5)

    def test_noise_from_clean_estimate(self):
        schedule = NoiseSchedule()
        z0 = torch.randn(3, 3, 8, 8, dtype=torch.float64)
        noise = torch.randn_like(z0)
        t = torch.tensor([1, 500, 1000])
        z_t = schedule.add_noise(z0, t, noise)
        assert torch.allclose(schedule.predict_eps(z_t, t, z0), noise, atol=1e-6)

    @pytest.mark.parametrize("t", [-1, 1001])
    def test_out_of_range(self, t):
        z0 = torch.zeros(3, 2, 2)
        with pytest.raises(ValueError):
            NoiseSchedule().add_noise(z0, t, z0)


class TestTextEncoder:
    def test_tokenize_strips_punctuation(self):
        assert tokenize("A photo of red circle, blue square, and gray crescent.") == [
            "a", "photo", "of", "red", "circle", "blue", "square", "and", "gray", "crescent",
        ]

    def test_frozen_and_deterministic(self):
        a = ToyTextEncoder(["red", "circle"], dim=8, seed=3)
        b = ToyTextEncoder(["circle", "red"], dim=8, seed=3)
        assert list(a.parameters()) == []
        assert torch.equal(a.encode(["a red circle"]), b.encode(["a red circle"]))

    def test_padding_and_unknown_words(self, caplog):
        encoder = ToyTextEncoder(["red", "circle", "a"], dim=8, max_tokens=6)
        with caplog.at_level(logging.WARNING, logger="model.text_encoder"):
            ids = encoder.token_ids("a red zebra")
        assert ids[2] == encoder.index["<unk>"]
        assert ids[3:] == [encoder.index["<pad>"]] * 3
        assert "zebra" in caplog.text

    def test_truncation(self):
        encoder = ToyTextEncoder(["a"], dim=8, max_tokens=4)
        assert len(encoder.tokens("a a a a a a")) == 4

    def test_encode_sequence_grounded_positions(self):
        encoder = ToyTextEncoder(["red", "circle", "a"], dim=8, max_tokens=5)
        seq = encoder.encode_sequence("a red circle", [2])
        assert seq.token_strings[2] == "circle"
        assert seq.embeddings.shape == (5, 8)


class TestModelConfig:
    def test_default_layers(self):
        layers = ModelConfig().attention_layers
        assert layers == {
            "enc.16": (16, 16),
            "mid.8": (8, 8),
            "dec.16a": (16, 16),
            "dec.16b": (16, 16),
            "dec.32": (32, 32),
        }

    def test_layer_groups(self):
        config = ModelConfig()
        assert config.layer_group("mid-dec") == ["dec.16a", "dec.16b", "dec.32", "mid.8"]
        assert config.layer_group("dec-full") == ["dec.32"]
        with pytest.raises(ConfigurationError):
            config.layer_group("everything")

    def test_check_layers(self):
        with pytest.raises(ConfigurationError):
            ModelConfig().check_layers(["enc.99"])


class TestToyUNet:
    def test_architecture_is_deterministic(self, tiny_model_config, registry):
        a = build_toy_ldm(tiny_model_config, registry.words).model
        b = build_toy_ldm(tiny_model_config, registry.words).model
        assert sum(p.numel() for p in a.parameters()) == sum(p.numel() for p in b.parameters())
        for (name_a, pa), (name_b, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert name_a == name_b
            assert torch.equal(pa, pb)

    def test_forward_shape_and_records(self, tiny_ldm):
        from src.attention import AttentionRecorder

        recorder = AttentionRecorder.for_model(tiny_ldm.model)
        z = torch.randn(2, 3, 32, 32)
        context = tiny_ldm.encoder.encode(["a red circle", "a blue square"])
        out = tiny_ldm.model(z, torch.tensor([5, 900]), context, recorder=recorder)
        assert out.shape == z.shape
        shapes = {k: r.spatial_shape for k, r in recorder.records.items()}
        assert shapes == tiny_ldm.config.attention_layers

    def test_wrong_resolution(self, tiny_ldm):
        with pytest.raises(ShapeMismatchError):
            tiny_ldm.model(torch.randn(1, 3, 16, 16), torch.tensor([1]), tiny_ldm.encoder.encode(["a"]))


class TestDenoiseLoss:
    def test_perfect_model_has_zero_loss(self):
        schedule = NoiseSchedule()
        z0 = torch.randn(2, 3, 8, 8)
        noise = torch.randn_like(z0)
        loss, maps = denoise_loss(z0, torch.zeros(2, 4, 8), torch.tensor([3, 7]), noise, _EchoNoise(noise), schedule)
        assert loss.item() == 0.0
        assert maps == {}

    def test_zero_model_has_unit_loss(self):
        schedule = NoiseSchedule()
        gen = torch.Generator().manual_seed(0)
        losses = []
        for _ in range(1000):
            z0 = torch.randn(1, 3, 4, 4, generator=gen)
            noise = torch.randn(z0.shape, generator=gen)
            loss, _ = denoise_loss(z0, torch.zeros(1, 2, 4), torch.tensor([500]), noise, _Zeros(), schedule)
            losses.append(loss.item())
        assert sum(losses) / len(losses) == pytest.approx(1.0, abs=0.1)

    def test_records_all_layers_and_is_differentiable(self, tiny_ldm):
        gen = torch.Generator().manual_seed(1)
        z0 = torch.rand(2, 3, 32, 32, generator=gen) * 2 - 1
        noise = torch.randn(z0.shape, generator=gen)
        context = tiny_ldm.encoder.encode(["a red circle", "a blue square"])
        loss, maps = denoise_loss(z0, context, torch.tensor([100, 800]), noise, tiny_ldm.model, tiny_ldm.schedule)
        assert set(maps) == set(tiny_ldm.model.attention_layer_ids)
        loss.backward()
        assert tiny_ldm.model.attn_mid.to_q.weight.grad is not None

    def test_identical_inputs_identical_loss(self, tiny_ldm):
        def run() -> float:
            gen = torch.Generator().manual_seed(5)
            z0 = torch.randn(1, 3, 32, 32, generator=gen)
            noise = torch.randn(z0.shape, generator=gen)
            context = tiny_ldm.encoder.encode(["a red circle"])
            loss, _ = denoise_loss(z0, context, torch.tensor([321]), noise, tiny_ldm.model, tiny_ldm.schedule)
            return loss.item()

        assert run() == run()


class TestSampler:
    def test_timestep_subsequence(self):
        steps = timestep_subsequence(1000, 50)
        assert steps[0] == 1000 and steps[-1] == 1
        assert len(steps) == 50
        assert steps == sorted(steps, reverse=True)
        with pytest.raises(ValueError):
            timestep_subsequence(10, 11)

    def test_defaults(self):
        config = SamplerConfig()
        assert config.steps == 50
        assert config.guidance_scale == 7.5

    def test_seeded_and_bounded(self, tiny_ldm):
        config = SamplerConfig(steps=3, guidance_scale=2.0)
        a = sample(tiny_ldm.model, tiny_ldm.encoder, tiny_ldm.schedule, ["a red circle"], [7], config)
        b = sample(tiny_ldm.model, tiny_ldm.encoder, tiny_ldm.schedule, ["a red circle"], [7], config)
        assert a.shape == (1, 3, 32, 32)
        assert torch.equal(a, b)
        assert torch.isfinite(a).all() and a.abs().max() <= 1.0

    def test_guidance_one_is_conditional_trajectory(self, tiny_ldm):
        calls: list[int] = []
        model = tiny_ldm.model
        handle = model.register_forward_hook(lambda m, i, o: calls.append(i[0].shape[0]))
        try:
            sample(model, tiny_ldm.encoder, tiny_ldm.schedule, ["a red circle"], [1], SamplerConfig(steps=2, guidance_scale=1.0))
        finally:
            handle.remove()
        assert calls == [1, 1]

    def test_batching_does_not_change_items(self, tiny_ldm):
        config = SamplerConfig(steps=2, sampler="ancestral", guidance_scale=3.0)
        args = (tiny_ldm.model, tiny_ldm.encoder, tiny_ldm.schedule)
        alone = sample(*args, ["a blue square"], [11], config)
        batched = sample(*args, ["a red circle", "a blue square"], [10, 11], config)
        assert torch.allclose(alone[0], batched[1], atol=1e-5)

    def test_ddim_step_uses_noise_of_clamped_estimate(self, tiny_ldm):
        schedule = tiny_ldm.schedule
        model = _ConstantNoise(ModelConfig(), value=3.0)
        config = SamplerConfig(steps=3, guidance_scale=1.0)
        result = sample(model, tiny_ldm.encoder, schedule, ["a red circle"], [7], config)

        z = torch.randn((3, 32, 32), generator=torch_generator(7))[None]
        timesteps = timestep_subsequence(schedule.T, 3)
        for index, t in enumerate(timesteps):
            t_prev = timesteps[index + 1] if index + 1 < len(timesteps) else 0
            eps = torch.full_like(z, 3.0)
            x0 = schedule.predict_x0(z, t, eps).clamp(-1.0, 1.0)
            ab_prev = float(schedule.alpha_bars[t_prev])
            z = ab_prev**0.5 * x0 + (1.0 - ab_prev) ** 0.5 * schedule.predict_eps(z, t, x0)
        assert torch.allclose(result, z.clamp(-1.0, 1.0), atol=1e-5)
        assert result.abs().max() <= 1.0

    def test_warns_without_null_conditioning(self, tiny_ldm, caplog):
        with caplog.at_level(logging.WARNING, logger="model.sampler"):
            sample(tiny_ldm.model, tiny_ldm.encoder, tiny_ldm.schedule, ["a red circle"], [0], SamplerConfig(steps=1))
        assert "never saw null conditioning" in caplog.text


class TestCheckpoint:
    def test_round_trip(self, tiny_ldm, tmp_path):
        tiny_ldm.model.count_null_conditioning(3)
        path = save_checkpoint(tmp_path / "model.pt", tiny_ldm, step=12, train_config={"seed": 1})
        loaded = load_checkpoint(path)
        assert loaded.step == 12
        assert loaded.train_config == {"seed": 1}
        assert loaded.ldm.config == tiny_ldm.config
        assert loaded.ldm.encoder.vocabulary == tiny_ldm.encoder.vocabulary
        assert int(loaded.ldm.model.null_condition_samples) == 3
        for (_, a), (_, b) in zip(tiny_ldm.model.state_dict().items(), loaded.ldm.model.state_dict().items()):
            assert torch.equal(a, b)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "other.pt"
        torch.save({"header": "something-else"}, path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.pt")

    def test_header_constant(self):
        assert CHECKPOINT_HEADER == "tokencompose-toy-v1"
