from __future__ import annotations

from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator

from src.utils.files import content_hash


class RunManifest(BaseModel):
    """Audit record written once per CLI invocation."""

    command: str = Field(description="Subcommand name")
    config: dict[str, Any] = Field(description="Fully resolved configuration")
    seeds: dict[str, int] = Field(default_factory=dict)
    paths: dict[str, str] = Field(default_factory=dict, description="Absolute input/output paths")
    version: str = Field(description="git-describe style version string")
    started_at: str = Field(description="UTC ISO timestamp")
    duration_seconds: float = Field(default=0.0, ge=0.0)

    model_config = {"json_schema_serialization_defaults_required": True}

    @field_validator("paths")
    @classmethod
    def _absolute(cls, value: dict[str, str]) -> dict[str, str]:
        for name, path in value.items():
            if not Path(path).is_absolute():
                raise ValueError(f"path '{name}' is not absolute: {path}")
        return value

    def content_hash(self) -> str:
        return content_hash(
            self.model_dump(mode="json", exclude={"started_at", "duration_seconds"})
        )
