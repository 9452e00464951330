from __future__ import annotations

import subprocess
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, TypeVar

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib

from pydantic import BaseModel, ValidationError

from src import __version__
from src.errors import ConfigurationError
from src.schemas.run import RunManifest
from src.utils.files import write_json

SECTIONS = ("data", "model", "train", "sample", "eval")
MANIFEST_FILE = "run_manifest.json"

ModelT = TypeVar("ModelT", bound=BaseModel)


def load_config_file(path: Path | None) -> dict[str, dict[str, Any]]:
    """TOML file with optional [data] [model] [train] [sample] [eval] tables."""
    if path is None:
        return {}
    try:
        with Path(path).open("rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid TOML: {e}") from e

    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(
            f"Unknown config section(s) {unknown}; valid: {', '.join(SECTIONS)}"
        )
    return {name: dict(raw.get(name, {})) for name in SECTIONS if name in raw}


def resolve(
    model: type[ModelT], file_values: dict[str, Any] | None, **flags: Any
) -> ModelT:
    """Built-in defaults < config file < flags; flags left as None do not override.

    Invalid values raise ConfigurationError so they map to the usage exit code.
    """
    values = dict(file_values or {})
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return model.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {model.__name__}: {e}") from e


def describe_version() -> str:
    root = Path(__file__).resolve().parents[2]
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=root,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    return result.stdout.strip() or __version__


class RunRecord:
    """Collects what a command did and writes its RunManifest once."""

    def __init__(self, command: str, out_dir: Path) -> None:
        self.command = command
        self.out_dir = Path(out_dir).resolve()
        self.config: dict[str, Any] = {}
        self.seeds: dict[str, int] = {}
        self.paths: dict[str, str] = {"out": str(self.out_dir)}
        self.started_at = datetime.now(timezone.utc).isoformat()
        self._start = time.perf_counter()
        self._written = False

    def add_path(self, name: str, path: Path) -> None:
        self.paths[name] = str(Path(path).resolve())

    def write(self) -> RunManifest:
        if self._written:
            raise RuntimeError(f"{self.command}: run manifest already written")
        manifest = RunManifest(
            command=self.command,
            config=self.config,
            seeds=self.seeds,
            paths=self.paths,
            version=describe_version(),
            started_at=self.started_at,
            duration_seconds=time.perf_counter() - self._start,
        )
        write_json(self.out_dir / MANIFEST_FILE, manifest.model_dump(mode="json"))
        self._written = True
        return manifest
