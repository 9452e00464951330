from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import torch
from torch import Tensor, nn

from src.errors import ConfigurationError, ShapeMismatchError

if TYPE_CHECKING:
    from src.attention.recorder import AttentionRecorder


@dataclass
class TokenEmbeddingSequence:
    """Encoded caption: one embedding row per word token."""

    embeddings: Tensor
    token_strings: list[str]
    grounded_positions: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        length = self.embeddings.shape[-2]
        if length < 1:
            raise ValueError("token sequence must contain at least one token")
        if len(self.token_strings) != length:
            raise ShapeMismatchError(
                f"{len(self.token_strings)} token strings for {length} embeddings"
            )
        if len(set(self.grounded_positions)) != len(self.grounded_positions):
            raise ValueError(f"grounded positions not distinct: {self.grounded_positions}")
        for position in self.grounded_positions:
            if not 0 <= position < length:
                raise ValueError(f"grounded position {position} outside [0, {length})")

    def __len__(self) -> int:
        return len(self.token_strings)


@dataclass(frozen=True)
class CrossAttentionConfig:
    num_heads: int
    key_dim: int
    layer_id: str

    def __post_init__(self) -> None:
        if self.num_heads < 1 or self.key_dim < 1:
            raise ConfigurationError(
                f"{self.layer_id}: num_heads and key_dim must be >= 1 "
                f"(got {self.num_heads}, {self.key_dim})"
            )


@dataclass
class AttentionRecord:
    """Head-averaged cross-attention map of one layer.

    ``map`` has shape [h*w, L_tokens] or, batched, [B, h*w, L_tokens]; rows are
    spatial locations in row-major order and sum to one over tokens.
    """

    layer_id: str
    spatial_shape: tuple[int, int]
    map: Tensor

    @property
    def batched(self) -> bool:
        return self.map.dim() == 3

    @property
    def num_tokens(self) -> int:
        return self.map.shape[-1]

    def select(self, index: int) -> AttentionRecord:
        if not self.batched:
            raise ValueError(f"{self.layer_id}: record is not batched")
        return AttentionRecord(self.layer_id, self.spatial_shape, self.map[index])

    def column(self, position: int) -> Tensor:
        """Attention of one token over space as an (h, w) grid."""
        if self.batched:
            raise ValueError(f"{self.layer_id}: select a batch element first")
        return self.map[:, position].reshape(self.spatial_shape)

    def detach(self) -> AttentionRecord:
        return AttentionRecord(self.layer_id, self.spatial_shape, self.map.detach())


def _split_heads(x: Tensor, num_heads: int, key_dim: int) -> Tensor:
    # [..., N, H*d_k] -> [..., H, N, d_k]
    return x.unflatten(-1, (num_heads, key_dim)).transpose(-3, -2)


def _text_tensor(text: TokenEmbeddingSequence | Tensor) -> Tensor:
    return text.embeddings if isinstance(text, TokenEmbeddingSequence) else text


def project_qk(
    latent_features: Tensor,
    text: TokenEmbeddingSequence | Tensor,
    cfg: CrossAttentionConfig,
    to_q: nn.Linear,
    to_k: nn.Linear,
) -> tuple[Tensor, Tensor]:
    """Per-head query/key projections.

    ``latent_features`` is channel-last, [h, w, c] or [B, h, w, c]; the spatial
    grid is flattened row-major before projection. Returns Q [..., H, h*w, d_k]
    and K [..., H, L, d_k].
    """
    width = latent_features.shape[-1]
    inner = cfg.num_heads * cfg.key_dim
    if to_q.in_features != width:
        raise ConfigurationError(
            f"{cfg.layer_id}: latent width {width} != query projection input {to_q.in_features}"
        )
    if to_q.out_features != inner or to_k.out_features != inner:
        raise ConfigurationError(
            f"{cfg.layer_id}: projections must output H*d_k = {inner} features"
        )
    embeddings = _text_tensor(text)
    if to_k.in_features != embeddings.shape[-1]:
        raise ConfigurationError(
            f"{cfg.layer_id}: text width {embeddings.shape[-1]} != key projection input "
            f"{to_k.in_features}"
        )

    flat = latent_features.flatten(-3, -2)
    q = _split_heads(to_q(flat), cfg.num_heads, cfg.key_dim)
    k = _split_heads(to_k(embeddings), cfg.num_heads, cfg.key_dim)
    return q, k


def attention_probs(q: Tensor, k: Tensor, cfg: CrossAttentionConfig) -> Tensor:
    """Per-head softmax over the token axis, [..., H, h*w, L]."""
    if q.shape[-3] != k.shape[-3]:
        raise ShapeMismatchError(
            f"{cfg.layer_id}: Q has {q.shape[-3]} heads but K has {k.shape[-3]}"
        )
    if q.shape[-3] != cfg.num_heads or q.shape[-1] != cfg.key_dim:
        raise ShapeMismatchError(
            f"{cfg.layer_id}: expected {cfg.num_heads} heads of width {cfg.key_dim}, "
            f"got {q.shape[-3]} of width {q.shape[-1]}"
        )
    logits = q @ k.transpose(-1, -2) / math.sqrt(cfg.key_dim)
    # torch.softmax subtracts the row max before exponentiating
    return torch.softmax(logits, dim=-1)


def head_averaged_attention(
    q: Tensor,
    k: Tensor,
    cfg: CrossAttentionConfig,
    spatial_shape: tuple[int, int] | None = None,
) -> AttentionRecord:
    probs = attention_probs(q, k, cfg)
    positions = probs.shape[-2]
    if spatial_shape is None:
        side = math.isqrt(positions)
        if side * side != positions:
            raise ValueError(
                f"{cfg.layer_id}: cannot infer a square grid from {positions} positions"
            )
        spatial_shape = (side, side)
    elif spatial_shape[0] * spatial_shape[1] != positions:
        raise ShapeMismatchError(
            f"{cfg.layer_id}: spatial shape {spatial_shape} does not cover {positions} positions"
        )
    return AttentionRecord(cfg.layer_id, spatial_shape, probs.mean(dim=-3))


class CrossAttention(nn.Module):
    """Text cross-attention block with a residual connection.

    Only the head-averaged map is exposed, and only to an attached recorder.
    """

    def __init__(
        self,
        channels: int,
        text_dim: int,
        cfg: CrossAttentionConfig,
        norm_groups: int = 8,
    ) -> None:
        super().__init__()
        self.cfg = cfg
        inner = cfg.num_heads * cfg.key_dim
        self.norm = nn.GroupNorm(norm_groups, channels)
        self.to_q = nn.Linear(channels, inner, bias=False)
        self.to_k = nn.Linear(text_dim, inner, bias=False)
        self.to_v = nn.Linear(text_dim, inner, bias=False)
        self.to_out = nn.Linear(inner, channels)

    @property
    def layer_id(self) -> str:
        return self.cfg.layer_id

    def forward(
        self,
        x: Tensor,
        context: Tensor,
        recorder: AttentionRecorder | None = None,
    ) -> Tensor:
        b, c, h, w = x.shape
        latent = self.norm(x).permute(0, 2, 3, 1)
        q, k = project_qk(latent, context, self.cfg, self.to_q, self.to_k)
        probs = attention_probs(q, k, self.cfg)
        if recorder is not None:
            recorder.capture(AttentionRecord(self.layer_id, (h, w), probs.mean(dim=-3)))

        v = _split_heads(self.to_v(context), self.cfg.num_heads, self.cfg.key_dim)
        out = (probs @ v).transpose(-3, -2).flatten(-2)
        out = self.to_out(out).transpose(1, 2).reshape(b, c, h, w)
        return x + out
