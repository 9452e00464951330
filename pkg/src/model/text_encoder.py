from __future__ import annotations

import logging
import math
import re
from collections.abc import Iterable, Sequence

import torch
from torch import Tensor, nn

from src.attention.cross_attention import TokenEmbeddingSequence

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
TEMPLATE_WORDS = ("a", "and", "of", "photo")

_WORD = re.compile(r"[a-z0-9]+")


def tokenize(caption: str) -> list[str]:
    """Lowercase, drop punctuation, split on whitespace."""
    return _WORD.findall(caption.lower())


def sinusoidal_positions(length: int, dim: int) -> Tensor:
    position = torch.arange(length, dtype=torch.float32)[:, None]
    freqs = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(position * freqs)
    table[:, 1::2] = torch.cos(position * freqs)[:, : dim // 2]
    return table


class ToyTextEncoder(nn.Module):
    """Frozen word-embedding table plus sinusoidal positions.

    There is no start token, so embedding row i belongs to word i of the
    tokenized caption. The empty caption (all padding) is the null condition.
    """

    def __init__(
        self,
        words: Iterable[str],
        dim: int = 64,
        max_tokens: int = 16,
        seed: int = 0,
    ) -> None:
        super().__init__()
        self.logger = logging.getLogger("model.text_encoder")
        specials = (PAD_TOKEN, UNK_TOKEN)
        rest = sorted({w.lower() for w in words} - set(specials))
        self.vocabulary: list[str] = [*specials, *rest]
        self.index = {word: i for i, word in enumerate(self.vocabulary)}
        self.dim = dim
        self.max_tokens = max_tokens

        generator = torch.Generator().manual_seed(seed)
        table = torch.randn(len(self.vocabulary), dim, generator=generator)
        self.register_buffer("embedding", table)
        self.register_buffer("positions", sinusoidal_positions(max_tokens, dim))

    def tokens(self, caption: str) -> list[str]:
        """Padded token strings of one caption (unknown words kept verbatim)."""
        words = tokenize(caption)
        if len(words) > self.max_tokens:
            self.logger.warning(
                f"Caption has {len(words)} words; truncating to {self.max_tokens}: {caption!r}"
            )
            words = words[: self.max_tokens]
        return words + [PAD_TOKEN] * (self.max_tokens - len(words))

    def token_ids(self, caption: str) -> list[int]:
        words = self.tokens(caption)
        unknown = sorted({w for w in words if w not in self.index})
        if unknown:
            self.logger.warning(f"Out-of-vocabulary words mapped to {UNK_TOKEN}: {unknown}")
        unk = self.index[UNK_TOKEN]
        return [self.index.get(word, unk) for word in words]

    def encode(self, captions: Sequence[str]) -> Tensor:
        """[B, max_tokens, dim] embeddings."""
        ids = torch.tensor(
            [self.token_ids(c) for c in captions], dtype=torch.long, device=self.embedding.device
        )
        return self.embedding[ids] + self.positions

    def forward(self, captions: Sequence[str]) -> Tensor:
        return self.encode(captions)

    def null_context(self, batch: int) -> Tensor:
        return self.encode([""] * batch)

    def encode_sequence(
        self, caption: str, grounded_positions: Sequence[int] = ()
    ) -> TokenEmbeddingSequence:
        return TokenEmbeddingSequence(
            embeddings=self.encode([caption])[0],
            token_strings=self.tokens(caption),
            grounded_positions=list(grounded_positions),
        )
