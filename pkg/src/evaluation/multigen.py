from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.errors import ConfigurationError
from src.schemas.evaluation import MGScore, MultiGenPrompt, MultiGenSuite
from src.utils.files import write_json
from src.utils.seeding import numpy_rng


def format_prompt(categories: Sequence[str]) -> str:
    """'A photo of A, B, C, D, and E.' with lowercase category names."""
    names = [c.lower() for c in categories]
    if len(names) == 1:
        body = names[0]
    elif len(names) == 2:
        body = f"{names[0]} and {names[1]}"
    else:
        body = f"{', '.join(names[:-1])}, and {names[-1]}"
    return f"A photo of {body}."


def build_multigen(
    pool: Sequence[str],
    n_prompts: int,
    seed: int,
    categories_per_prompt: int = 5,
    rounds: int = 10,
) -> MultiGenSuite:
    """Prompts of distinct categories drawn from ``pool``, in seeded sentence order."""
    if len(set(pool)) != len(pool):
        raise ConfigurationError(f"category pool has duplicates: {list(pool)}")
    if len(pool) < categories_per_prompt:
        raise ConfigurationError(
            f"pool of {len(pool)} categories cannot fill {categories_per_prompt}-category prompts"
        )
    if n_prompts < 1:
        raise ConfigurationError(f"n_prompts must be >= 1, got {n_prompts}")

    rng = numpy_rng(seed)
    prompts = []
    for _ in range(n_prompts):
        picked = rng.choice(len(pool), size=categories_per_prompt, replace=False)
        categories = [pool[int(i)] for i in picked]
        prompts.append(MultiGenPrompt(categories=categories, text=format_prompt(categories)))
    return MultiGenSuite(pool=list(pool), seed=seed, prompts=prompts, rounds=rounds)


def save_suite(suite: MultiGenSuite, path: Path) -> None:
    write_json(path, suite.model_dump(mode="json"))


def load_suite(path: Path) -> MultiGenSuite:
    return MultiGenSuite.model_validate_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class MultiGenScores:
    mg: dict[str, MGScore]
    mg_per_round: dict[str, list[float]]
    object_accuracy: float
    per_category_success: dict[str, float] = field(default_factory=dict)


def incidence_counts(
    detections: Sequence[Sequence[set[str]]], suite: MultiGenSuite
) -> np.ndarray:
    """[rounds, prompts] number of prompted categories that were detected."""
    if len(detections) != suite.rounds:
        raise ValueError(f"expected detections for {suite.rounds} rounds, got {len(detections)}")
    counts = np.zeros((suite.rounds, len(suite.prompts)), dtype=np.int64)
    for r, round_detections in enumerate(detections):
        if len(round_detections) != len(suite.prompts):
            raise ValueError(
                f"round {r}: {len(round_detections)} detection sets for "
                f"{len(suite.prompts)} prompts"
            )
        for p, (prompt, found) in enumerate(zip(suite.prompts, round_detections)):
            counts[r, p] = len(set(prompt.categories) & set(found))
    return counts


def mg_scores(
    detections: Sequence[Sequence[set[str]]], suite: MultiGenSuite
) -> MultiGenScores:
    """MGk = percent of images with at least k prompted categories detected.

    Means and population standard deviations are taken over rounds; object
    accuracy pools every image of every round.
    """
    counts = incidence_counts(detections, suite)
    sizes = np.array([len(p.categories) for p in suite.prompts])
    top = int(sizes.max()) if sizes.size else 0

    mg: dict[str, MGScore] = {}
    per_round: dict[str, list[float]] = {}
    for k in range(2, top + 1):
        rates = (counts >= k).mean(axis=1) * 100.0
        key = f"MG{k}"
        per_round[key] = [float(r) for r in rates]
        mg[key] = MGScore(mean=float(rates.mean()), std=float(rates.std(ddof=0)))

    object_accuracy = float((counts == sizes[None, :]).mean() * 100.0)

    per_category: dict[str, float] = {}
    for category in suite.pool:
        hits = 0
        total = 0
        for round_detections in detections:
            for prompt, found in zip(suite.prompts, round_detections):
                if category in prompt.categories:
                    total += 1
                    hits += category in found
        if total:
            per_category[category] = 100.0 * hits / total

    return MultiGenScores(
        mg=mg,
        mg_per_round=per_round,
        object_accuracy=object_accuracy,
        per_category_success=per_category,
    )
