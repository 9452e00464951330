from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid wiring between configuration and model (layer ids, widths)."""


class ShapeMismatchError(ValueError):
    """Attention maps and masks (or tensors in general) disagree in shape."""


class SceneError(ValueError):
    """A scene description cannot be rasterized."""


class DatasetFormatError(ValueError):
    """A grounded dataset directory violates the on-disk contract."""


class CheckpointError(ValueError):
    """A checkpoint archive is missing fields or has an unknown header."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss and was aborted."""

    def __init__(self, step: int, last_checkpoint: str | None) -> None:
        self.step = step
        self.last_checkpoint = last_checkpoint
        where = last_checkpoint or "none written yet"
        super().__init__(
            f"Non-finite loss at step {step}; last good checkpoint: {where}"
        )


class DetectorGateError(RuntimeError):
    """The oracle detector failed its validation gate."""

    def __init__(self, accuracy: float, required: float) -> None:
        self.accuracy = accuracy
        self.required = required
        super().__init__(
            f"Oracle detector accuracy {accuracy:.4f} below required {required:.2f}"
        )
