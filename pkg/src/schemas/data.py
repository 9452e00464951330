from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

DATASET_FORMAT_VERSION = "grounded-ds-v1"


class ObjectSpec(BaseModel):
    """One shape instance in a synthetic scene."""

    category: str = Field(description="Registry category, e.g. 'red circle'")
    center: tuple[int, int] = Field(description="(x, y) pixel coordinates of the box center")
    size: int = Field(ge=1, description="Side length of the object's bounding box")
    z_order: int = Field(default=0, description="Higher values are drawn on top")

    model_config = {"json_schema_serialization_defaults_required": True}


class SceneSpec(BaseModel):
    """Canvas plus the objects to rasterize on it."""

    height: int = Field(default=32, ge=1, description="Canvas height h0")
    width: int = Field(default=32, ge=1, description="Canvas width w0")
    background: tuple[int, int, int] = Field(
        default=(255, 255, 255), description="Background RGB color"
    )
    objects: list[ObjectSpec] = Field(default_factory=list, description="Objects to draw")

    model_config = {"json_schema_serialization_defaults_required": True}


class DetectorThresholds(BaseModel):
    """Oracle detector thresholds fixed by the validation gate."""

    min_area: int = Field(default=8, ge=1, description="A_min, minimum component pixels")
    color_tolerance: float = Field(
        default=60.0, gt=0.0, description="tau_color, max RGB distance to a registry color"
    )
    shape_score: float = Field(
        default=0.8,
        ge=0.0,
        le=1.0,
        description="tau_shape, min fraction of component pixels inside the fitted template",
    )
    template_dilation: int = Field(
        default=1, ge=0, description="Template dilation iterations (rasterization slack)"
    )

    model_config = {"json_schema_serialization_defaults_required": True}


class GroundingRecord(BaseModel):
    token_position: int = Field(ge=0, description="Index into the caption's word tokens")
    category: str = Field(description="Category the token refers to")
    mask_file: str = Field(description="Mask path relative to the dataset root")

    model_config = {"json_schema_serialization_defaults_required": True}


class MetadataRecord(BaseModel):
    """One line of metadata.jsonl."""

    id: str = Field(description="Sample identifier")
    caption: str = Field(description="Caption text")
    groundings: list[GroundingRecord] = Field(default_factory=list)

    model_config = {"json_schema_serialization_defaults_required": True}


class DatasetManifest(BaseModel):
    """manifest.json at the dataset root."""

    format_version: Literal["grounded-ds-v1"] = Field(default=DATASET_FORMAT_VERSION)
    registry: list[str] = Field(description="Category names available to captions")
    seed: int = Field(description="Generation seed")
    count: int = Field(ge=0, description="Number of samples")
    resolution: tuple[int, int] = Field(description="(height, width) of every image")
    sample_ids: list[str] = Field(default_factory=list, description="Every sample id")
    detector: DetectorThresholds = Field(default_factory=DetectorThresholds)

    model_config = {"json_schema_serialization_defaults_required": True}


class DatasetConfig(BaseModel):
    """Generation settings for a synthetic grounded dataset."""

    count: int = Field(default=4526, ge=1, description="Number of scenes to render")
    seed: int = Field(default=0, description="Generation seed")
    id_prefix: str = Field(default="s", min_length=1, description="Sample id prefix")
    resolution: int = Field(default=32, ge=8, description="Canvas side length h0 = w0")
    max_objects: int = Field(default=5, ge=1, le=5, description="Objects per scene, upper bound")
    categories: list[str] | None = Field(
        default=None, description="Registry subset to draw from (None -> all)"
    )

    model_config = {"json_schema_serialization_defaults_required": True}
