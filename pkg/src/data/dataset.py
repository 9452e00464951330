from __future__ import annotations

import io
import json
import logging
from collections.abc import Iterator
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import ValidationError
from tqdm import tqdm

from src.data.registry import CategoryRegistry
from src.data.render import GroundedSample, Grounding, render, sample_scene
from src.errors import DatasetFormatError
from src.model.text_encoder import tokenize
from src.schemas.data import (
    DatasetManifest,
    DetectorThresholds,
    GroundingRecord,
    MetadataRecord,
)
from src.utils.files import atomic_write_bytes, atomic_write_text, write_json
from src.utils.seeding import numpy_rng

logger = logging.getLogger("data.dataset")

MANIFEST_FILE = "manifest.json"
METADATA_FILE = "metadata.jsonl"


def _png_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, format="PNG")
    return buffer.getvalue()


def mask_filename(sample_id: str, grounding: Grounding) -> str:
    category = grounding.category.replace(" ", "_")
    return f"masks/{sample_id}/{grounding.token_position}_{category}.png"


def write_sample(sample: GroundedSample, out_dir: Path) -> MetadataRecord:
    """Write image and masks of one sample; returns its metadata line."""
    atomic_write_bytes(out_dir / "images" / f"{sample.id}.png", _png_bytes(sample.image))
    records = []
    for grounding in sample.groundings:
        relative = mask_filename(sample.id, grounding)
        pixels = grounding.mask.astype(np.uint8) * 255
        atomic_write_bytes(out_dir / relative, _png_bytes(pixels))
        records.append(
            GroundingRecord(
                token_position=grounding.token_position,
                category=grounding.category,
                mask_file=relative,
            )
        )
    return MetadataRecord(id=sample.id, caption=sample.caption, groundings=records)


def generate_dataset(
    n_samples: int,
    registry: CategoryRegistry,
    seed: int,
    out_dir: Path,
    id_prefix: str = "s",
    resolution: int = 32,
    max_objects: int = 5,
    thresholds: DetectorThresholds | None = None,
    progress: bool = False,
) -> DatasetManifest:
    """Render ``n_samples`` scenes and write the grounded-dataset layout.

    Sample i draws from a generator seeded by (seed, i), so a run is
    reproducible sample by sample.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines: list[str] = []
    ids: list[str] = []
    indices = tqdm(range(n_samples), desc="rendering", leave=False) if progress else range(n_samples)
    for index in indices:
        spec = sample_scene(
            registry, numpy_rng(seed, index), height=resolution, width=resolution,
            max_objects=max_objects,
        )
        sample = render(spec, seed=seed, registry=registry, sample_id=f"{id_prefix}{index:06d}")
        record = write_sample(sample, out_dir)
        lines.append(json.dumps(record.model_dump(mode="json"), sort_keys=True))
        ids.append(sample.id)

    atomic_write_text(out_dir / METADATA_FILE, "\n".join(lines) + "\n")
    manifest = DatasetManifest(
        registry=registry.names,
        seed=seed,
        count=n_samples,
        resolution=(resolution, resolution),
        sample_ids=ids,
        detector=thresholds or DetectorThresholds(),
    )
    write_json(out_dir / MANIFEST_FILE, manifest.model_dump(mode="json"))
    logger.info(f"Wrote {n_samples} samples to {out_dir}")
    return manifest


def read_manifest(directory: Path) -> DatasetManifest:
    path = Path(directory) / MANIFEST_FILE
    if not path.is_file():
        raise DatasetFormatError(f"{path} not found")
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DatasetFormatError(f"{path}: invalid manifest: {e}") from e


def center_crop_resize(image: Image.Image, size: int, resample: Image.Resampling) -> Image.Image:
    width, height = image.size
    side = min(width, height)
    if (width, height) != (side, side):
        left = (width - side) // 2
        top = (height - side) // 2
        image = image.crop((left, top, left + side, top + side))
    if side != size:
        image = image.resize((size, size), resample=resample)
    return image


def _load_sample(
    directory: Path, record: MetadataRecord, resolution: int | None
) -> GroundedSample:
    image_path = directory / "images" / f"{record.id}.png"
    if not image_path.is_file():
        raise DatasetFormatError(f"sample {record.id}: image not found: {image_path}")
    with Image.open(image_path) as handle:
        image = handle.convert("RGB")
    size = resolution or min(image.size)
    image = center_crop_resize(image, size, Image.Resampling.BILINEAR)

    tokens = tokenize(record.caption)
    groundings: list[Grounding] = []
    for entry in record.groundings:
        word = tokens[entry.token_position] if entry.token_position < len(tokens) else None
        noun = entry.category.split()[-1].lower()
        if word != noun:
            raise DatasetFormatError(
                f"sample {record.id}: token {entry.token_position} is {word!r}, "
                f"expected noun {noun!r} of {entry.category!r}"
            )
        mask_path = directory / entry.mask_file
        if not mask_path.is_file():
            raise DatasetFormatError(
                f"sample {record.id}: mask for token {entry.token_position} ({word!r}) "
                f"not found: {mask_path}"
            )
        with Image.open(mask_path) as handle:
            mask_image = handle.convert("L")
        mask_image = center_crop_resize(mask_image, size, Image.Resampling.NEAREST)
        mask = np.asarray(mask_image) > 127
        if not mask.any():
            raise DatasetFormatError(
                f"sample {record.id}: mask for token {entry.token_position} ({word!r}) is empty"
            )
        groundings.append(Grounding(entry.token_position, entry.category, mask))

    return GroundedSample(
        id=record.id, image=np.asarray(image, dtype=np.uint8), caption=record.caption,
        groundings=groundings,
    )


def load_dataset(directory: Path, resolution: int | None = None) -> Iterator[GroundedSample]:
    """Stream samples from a grounded-dataset directory.

    Images and masks are center-cropped to a square and resized to
    ``resolution`` (masks with nearest-neighbour) when it differs.
    """
    directory = Path(directory)
    read_manifest(directory)
    metadata = directory / METADATA_FILE
    if not metadata.is_file():
        raise DatasetFormatError(f"{metadata} not found")

    with metadata.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = MetadataRecord.model_validate_json(line)
            except ValidationError as e:
                raise DatasetFormatError(
                    f"{metadata.name} line {line_number}: malformed record: {e}"
                ) from e
            yield _load_sample(directory, record, resolution)
