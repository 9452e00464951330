from __future__ import annotations

from src.errors import ConfigurationError
from src.schemas.model import ModelConfig
from src.schemas.training import DEFAULT_LOSS_LAYERS, LossWeights

LAMBDA_TOKEN = 1e-3
GAMMA_PIXEL = 5e-5

PRESET_NAMES = ("tokencompose", "ldm-only", "token-only", "pixel-only")


def get_preset(name: str, layer_ids: list[str] | None = None) -> LossWeights:
    """Loss weights of a named ablation preset."""
    layers = list(layer_ids) if layer_ids is not None else list(DEFAULT_LOSS_LAYERS)
    if name == "tokencompose":
        return LossWeights(lambda_token=LAMBDA_TOKEN, gamma_pixel=GAMMA_PIXEL, layer_ids=layers)
    elif name == "ldm-only":
        return LossWeights(lambda_token=0.0, gamma_pixel=0.0, layer_ids=layers)
    elif name == "token-only":
        return LossWeights(lambda_token=LAMBDA_TOKEN, gamma_pixel=0.0, layer_ids=layers)
    elif name == "pixel-only":
        return LossWeights(lambda_token=0.0, gamma_pixel=GAMMA_PIXEL, layer_ids=layers)
    else:
        raise ConfigurationError(
            f"Unknown preset: {name} (valid: {', '.join(PRESET_NAMES)})"
        )


def resolve_loss_layers(config: ModelConfig, layers: list[str] | None) -> list[str] | None:
    """Expand a single layer-group name, or validate explicit layer ids."""
    if layers is None:
        return None
    if len(layers) == 1 and layers[0] not in config.attention_layers:
        return config.layer_group(layers[0])
    if len(set(layers)) != len(layers):
        raise ConfigurationError(f"Duplicate layer ids: {layers}")
    config.check_layers(layers)
    return sorted(layers)
