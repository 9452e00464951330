from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from pathlib import Path

from src.errors import ConfigurationError
from src.schemas.evaluation import CriterionResult, EvalReport, ExperimentSummary, RunScores
from src.utils.files import read_jsonl

logger = logging.getLogger("evaluation.experiment")

BASELINE = "ldm-only"
TOKEN_ONLY = "token-only"
GROUNDED = "tokencompose"

REPORT_FILE = "eval/eval_report.json"
METRICS_FILE = "metrics.jsonl"


def run_dir(runs: Path, seed: int, preset: str) -> Path:
    """``<runs>/seed-<seed>/<preset>``, the layout run-experiment.sh writes."""
    return Path(runs) / f"seed-{seed}" / preset


def final_denoise(metrics_path: Path, window: int = 50) -> float:
    """Mean denoising loss over the last ``window`` optimizer steps."""
    records = read_jsonl(metrics_path)
    if not records:
        raise ValueError(f"no metrics records in {metrics_path}")
    tail = records[-window:]
    return sum(float(r["denoise"]) for r in tail) / len(tail)


def load_run(runs: Path, seed: int, preset: str, window: int = 50) -> RunScores:
    directory = run_dir(runs, seed, preset)
    report_path = directory / REPORT_FILE
    if not report_path.is_file():
        raise FileNotFoundError(f"Missing eval report for {preset} seed {seed}: {report_path}")
    report = EvalReport.model_validate_json(report_path.read_text(encoding="utf-8"))
    return RunScores(
        preset=preset,
        seed=seed,
        attn_miou=report.attn_miou,
        mg2=report.mg["MG2"].mean,
        object_accuracy=report.object_accuracy,
        final_denoise=final_denoise(directory / METRICS_FILE, window),
    )


def _miou(run: RunScores) -> float:
    if run.attn_miou is None:
        raise ValueError(f"{run.preset} seed {run.seed} was evaluated without a held-out set")
    return run.attn_miou


def grounding_criteria(
    baseline: RunScores,
    grounded: RunScores,
    min_miou_gain: float = 0.05,
    max_denoise_ratio: float = 0.2,
) -> list[CriterionResult]:
    """Single-seed comparison of a grounded run against its denoising-only twin."""
    gain = _miou(grounded) - _miou(baseline)
    drift = abs(grounded.final_denoise - baseline.final_denoise)
    allowed = max_denoise_ratio * baseline.final_denoise
    return [
        CriterionResult(
            name="attn_miou_gain",
            passed=gain >= min_miou_gain,
            detail=f"{_miou(baseline):.4f} -> {_miou(grounded):.4f} (gain {gain:+.4f}, need {min_miou_gain:+.2f})",
        ),
        CriterionResult(
            name="mg2_not_worse",
            passed=grounded.mg2 >= baseline.mg2,
            detail=f"MG2 {baseline.mg2:.2f} -> {grounded.mg2:.2f}",
        ),
        CriterionResult(
            name="object_accuracy_not_worse",
            passed=grounded.object_accuracy >= baseline.object_accuracy,
            detail=f"OA {baseline.object_accuracy:.2f} -> {grounded.object_accuracy:.2f}",
        ),
        CriterionResult(
            name="denoise_within_bound",
            passed=drift <= allowed,
            detail=(
                f"denoise {baseline.final_denoise:.5f} -> {grounded.final_denoise:.5f} "
                f"(|diff| {drift:.5f}, allowed {allowed:.5f})"
            ),
        ),
    ]


def ablation_criteria(
    by_seed: dict[int, dict[str, RunScores]], min_agree: int | None = None
) -> list[CriterionResult]:
    """token-only beats ldm-only and tokencompose matches token-only, per seed.

    Each direction passes when at least ``min_agree`` seeds show it (default:
    two thirds of the seeds, rounded up).
    """
    seeds = sorted(by_seed)
    needed = min_agree if min_agree is not None else math.ceil(2 * len(seeds) / 3)
    if not 1 <= needed <= len(seeds):
        raise ConfigurationError(f"min_agree must lie in [1, {len(seeds)}], got {needed}")

    token_wins = [s for s in seeds if _miou(by_seed[s][TOKEN_ONLY]) > _miou(by_seed[s][BASELINE])]
    full_wins = [
        s for s in seeds if _miou(by_seed[s][GROUNDED]) >= _miou(by_seed[s][TOKEN_ONLY])
    ]
    return [
        CriterionResult(
            name="token_only_beats_baseline",
            passed=len(token_wins) >= needed,
            detail=f"seeds agreeing {token_wins} of {seeds}, need {needed}",
        ),
        CriterionResult(
            name="tokencompose_matches_token_only",
            passed=len(full_wins) >= needed,
            detail=f"seeds agreeing {full_wins} of {seeds}, need {needed}",
        ),
    ]


def check_experiment(
    runs: Path,
    seeds: Sequence[int],
    min_miou_gain: float = 0.05,
    max_denoise_ratio: float = 0.2,
    min_agree: int | None = None,
    window: int = 50,
) -> ExperimentSummary:
    """Read every run under ``runs`` and judge the comparison.

    The single-seed criteria use the first seed; the ablation directions use
    all of them.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    by_seed = {
        seed: {
            preset: load_run(runs, seed, preset, window)
            for preset in (BASELINE, TOKEN_ONLY, GROUNDED)
        }
        for seed in seeds
    }
    primary = by_seed[seeds[0]]
    criteria = grounding_criteria(
        primary[BASELINE], primary[GROUNDED], min_miou_gain, max_denoise_ratio
    )
    criteria.extend(ablation_criteria(by_seed, min_agree))

    summary = ExperimentSummary(
        seeds=list(seeds),
        runs=[run for seed in seeds for run in by_seed[seed].values()],
        criteria=criteria,
    )
    for criterion in criteria:
        level = logging.INFO if criterion.passed else logging.WARNING
        verdict = "pass" if criterion.passed else "FAIL"
        logger.log(level, f"{criterion.name}: {verdict} ({criterion.detail})")
    return summary
