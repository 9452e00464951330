"""Instrumented text cross-attention."""

from src.attention.cross_attention import (
    AttentionRecord,
    CrossAttention,
    CrossAttentionConfig,
    TokenEmbeddingSequence,
    attention_probs,
    head_averaged_attention,
    project_qk,
)
from src.attention.recorder import AttentionRecorder, record_pass

__all__ = [
    "AttentionRecord",
    "CrossAttention",
    "CrossAttentionConfig",
    "TokenEmbeddingSequence",
    "attention_probs",
    "head_averaged_attention",
    "project_qk",
    "AttentionRecorder",
    "record_pass",
]
