from __future__ import annotations

from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.attention.cross_attention import AttentionRecord  # noqa: E402
from src.data.render import GroundedSample  # noqa: E402
from src.schemas.evaluation import EvalReport  # noqa: E402


def _save(fig: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_mg_scores(reports: Mapping[str, EvalReport], path: Path) -> Path:
    """Grouped MG2..MG5 bars (mean +- std), one group per labelled report."""
    keys = sorted({k for r in reports.values() for k in r.mg}, key=lambda k: int(k[2:]))
    x = np.arange(len(keys))
    width = 0.8 / max(len(reports), 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    for offset, (label, report) in enumerate(reports.items()):
        means = [report.mg[k].mean if k in report.mg else 0.0 for k in keys]
        stds = [report.mg[k].std if k in report.mg else 0.0 for k in keys]
        ax.bar(x + offset * width, means, width, yerr=stds, capsize=3, label=label)
    ax.set_xticks(x + width * (len(reports) - 1) / 2, keys)
    ax.set_ylabel("success rate (%)")
    ax.set_ylim(0, 100)
    ax.legend()
    return _save(fig, path)


def plot_loss_curves(records: Sequence[dict[str, Any]], path: Path) -> Path:
    steps = [r["step"] for r in records]
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    left.plot(steps, [r["denoise"] for r in records], label="denoise")
    left.plot(steps, [r["total"] for r in records], label="total", alpha=0.7)
    left.set_xlabel("step")
    left.set_ylabel("loss")
    left.legend()

    layers = sorted(records[0]["token_per_layer"]) if records else []
    for layer in layers:
        right.plot(steps, [r["token_per_layer"][layer] for r in records], label=f"token {layer}")
        right.plot(
            steps, [r["pixel_per_layer"][layer] for r in records], "--", label=f"pixel {layer}"
        )
    right.set_xlabel("step")
    right.set_yscale("log")
    if layers:
        right.legend(fontsize="small")
    return _save(fig, path)


def plot_category_bars(values: Mapping[str, float], path: Path, ylabel: str) -> Path:
    """One bar per category (per-category success or mIoU)."""
    names = list(values)
    fig, ax = plt.subplots(figsize=(max(6, len(names) * 0.7), 4))
    ax.bar(range(len(names)), [values[n] for n in names], color="tab:blue")
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def plot_attention_heatmaps(
    samples: Sequence[GroundedSample],
    records: Sequence[AttentionRecord],
    path: Path,
) -> Path:
    """Per sample: the image, then mask and attention column of each grounded token."""
    columns = 1 + 2 * max((len(s.groundings) for s in samples), default=1)
    fig, axes = plt.subplots(
        len(samples), columns, figsize=(1.6 * columns, 1.8 * len(samples)), squeeze=False
    )
    for row, (sample, record) in enumerate(zip(samples, records)):
        axes[row, 0].imshow(sample.image)
        axes[row, 0].set_title(sample.id, fontsize=7)
        for index, grounding in enumerate(sample.groundings):
            word = grounding.category.split()[-1]
            axes[row, 1 + 2 * index].imshow(grounding.mask, cmap="gray")
            axes[row, 1 + 2 * index].set_title(word, fontsize=7)
            axes[row, 2 + 2 * index].imshow(
                record.column(grounding.token_position).cpu().numpy(), cmap="viridis"
            )
            axes[row, 2 + 2 * index].set_title(record.layer_id, fontsize=7)
    for ax in axes.flat:
        ax.axis("off")
    return _save(fig, path)


def save_image_grid(images: Sequence[np.ndarray], path: Path, titles: Sequence[str] = ()) -> Path:
    count = len(images)
    cols = min(count, 8) or 1
    rows = (count + cols - 1) // cols or 1
    fig, axes = plt.subplots(rows, cols, figsize=(1.6 * cols, 1.6 * rows), squeeze=False)
    for index, ax in enumerate(axes.flat):
        ax.axis("off")
        if index < count:
            ax.imshow(images[index])
            if index < len(titles):
                ax.set_title(titles[index], fontsize=5)
    return _save(fig, path)
