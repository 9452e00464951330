from __future__ import annotations

import logging
from collections.abc import Iterable

from src.attention.cross_attention import AttentionRecord
from src.errors import ConfigurationError


class AttentionRecorder:
    """Collects head-averaged maps from cross-attention layers during a forward pass.

    One recorder belongs to one training step or evaluation call; it is never
    shared across concurrent passes.
    """

    def __init__(self, available_layers: Iterable[str]) -> None:
        self.available: tuple[str, ...] = tuple(available_layers)
        self._records: dict[str, AttentionRecord] = {}
        self.logger = logging.getLogger("attention.recorder")

    @classmethod
    def for_model(cls, model: object) -> AttentionRecorder:
        return cls(getattr(model, "attention_layer_ids"))

    def begin_pass(self) -> None:
        self._records.clear()

    def capture(self, record: AttentionRecord) -> None:
        if record.layer_id not in self.available:
            raise ConfigurationError(
                f"Layer {record.layer_id} is not registered with this recorder"
            )
        if record.layer_id in self._records:
            self.logger.warning(
                f"Layer {record.layer_id} recorded twice in one pass; keeping the latest"
            )
        self._records[record.layer_id] = record

    @property
    def records(self) -> dict[str, AttentionRecord]:
        return dict(self._records)


def record_pass(
    recorder: AttentionRecorder, layer_ids: Iterable[str]
) -> dict[str, AttentionRecord]:
    """Records of the requested layers from the last forward pass, ordered by id."""
    requested = set(layer_ids)
    unknown = sorted(requested - set(recorder.available))
    if unknown:
        raise ConfigurationError(
            f"Unknown attention layer(s) {unknown}; valid ids: {sorted(recorder.available)}"
        )
    captured = recorder.records
    return {
        layer_id: captured[layer_id]
        for layer_id in sorted(requested)
        if layer_id in captured
    }
