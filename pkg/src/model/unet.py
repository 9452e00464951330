from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from src.attention.cross_attention import CrossAttention, CrossAttentionConfig
from src.attention.recorder import AttentionRecorder
from src.errors import ShapeMismatchError
from src.schemas.model import ModelConfig


def timestep_embedding(t: Tensor, dim: int) -> Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float32, device=t.device) / half
    )
    args = t.float()[:, None] * freqs[None]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int, groups: int) -> None:
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: Tensor, temb: Tensor) -> Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class Downsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class ToyUNet(nn.Module):
    """Three-stage residual U-Net predicting noise, with text cross-attention.

    Cross-attention sits at the half-resolution encoder stage, the bottleneck,
    twice in the half-resolution decoder stage and once at full resolution.
    Inputs are channel-first images [B, C, H, W] in [-1, 1].
    """

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        c0, c1, c2 = config.channels
        groups = config.norm_groups
        tdim = config.time_embed_dim
        enc_id, mid_id, dec_a_id, dec_b_id, dec_full_id = config.attention_layers

        def attention(channels: int, layer_id: str) -> CrossAttention:
            cfg = CrossAttentionConfig(config.num_heads, config.head_dim, layer_id)
            return CrossAttention(channels, config.text_dim, cfg, norm_groups=groups)

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            self.time_embed = nn.Sequential(
                nn.Linear(c0, tdim), nn.SiLU(), nn.Linear(tdim, tdim)
            )
            self.stem = nn.Conv2d(config.in_channels, c0, 3, padding=1)

            self.enc_full = ResBlock(c0, c0, tdim, groups)
            self.down_full = Downsample(c0)
            self.enc_half = ResBlock(c0, c1, tdim, groups)
            self.attn_enc = attention(c1, enc_id)
            self.down_half = Downsample(c1)

            self.mid_in = ResBlock(c1, c2, tdim, groups)
            self.attn_mid = attention(c2, mid_id)
            self.mid_out = ResBlock(c2, c2, tdim, groups)

            self.up_quarter = Upsample(c2)
            self.dec_half_a = ResBlock(c2 + c1, c1, tdim, groups)
            self.attn_dec_a = attention(c1, dec_a_id)
            self.dec_half_b = ResBlock(c1, c1, tdim, groups)
            self.attn_dec_b = attention(c1, dec_b_id)
            self.up_half = Upsample(c1)
            self.dec_full = ResBlock(c1 + c0, c0, tdim, groups)
            self.attn_dec_full = attention(c0, dec_full_id)

            self.out_norm = nn.GroupNorm(groups, c0)
            self.out_conv = nn.Conv2d(c0, config.in_channels, 3, padding=1)

        self.register_buffer("null_condition_samples", torch.zeros((), dtype=torch.long))

    @property
    def attention_layer_ids(self) -> tuple[str, ...]:
        return tuple(self.config.attention_layers)

    def forward(
        self,
        z_t: Tensor,
        t: Tensor,
        context: Tensor,
        recorder: AttentionRecorder | None = None,
    ) -> Tensor:
        res = self.config.base_resolution
        if z_t.dim() != 4 or z_t.shape[1:] != (self.config.in_channels, res, res):
            raise ShapeMismatchError(
                f"expected [B, {self.config.in_channels}, {res}, {res}] input, "
                f"got {tuple(z_t.shape)}"
            )
        if recorder is not None:
            recorder.begin_pass()

        temb = self.time_embed(timestep_embedding(t, self.config.channels[0]))

        h_full = self.enc_full(self.stem(z_t), temb)
        h = self.enc_half(self.down_full(h_full), temb)
        h_half = self.attn_enc(h, context, recorder)
        h = self.mid_in(self.down_half(h_half), temb)
        h = self.attn_mid(h, context, recorder)
        h = self.mid_out(h, temb)

        h = self.dec_half_a(torch.cat([self.up_quarter(h), h_half], dim=1), temb)
        h = self.attn_dec_a(h, context, recorder)
        h = self.dec_half_b(h, temb)
        h = self.attn_dec_b(h, context, recorder)
        h = self.dec_full(torch.cat([self.up_half(h), h_full], dim=1), temb)
        h = self.attn_dec_full(h, context, recorder)

        return self.out_conv(F.silu(self.out_norm(h)))

    def count_null_conditioning(self, samples: int) -> None:
        self.null_condition_samples += samples
