from __future__ import annotations

import os
from pathlib import Path

import pytest

from src.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from src.errors import ConfigurationError
from src.evaluation.experiment import (
    ablation_criteria,
    check_experiment,
    final_denoise,
    grounding_criteria,
    run_dir,
)
from src.schemas.evaluation import (
    EvalMetadata,
    EvalReport,
    ExperimentSummary,
    MGScore,
    RunScores,
    SamplerConfig,
)
from src.utils.files import append_jsonl, write_json

# (attn_miou, MG2, OA, denoise) per preset
PASSING = {
    "ldm-only": (0.30, 40.0, 2.0, 0.100),
    "token-only": (0.38, 42.0, 3.0, 0.104),
    "tokencompose": (0.41, 45.0, 4.0, 0.105),
}


def _report(miou: float, mg2: float, oa: float) -> EvalReport:
    return EvalReport(
        mg={
            "MG2": MGScore(mean=mg2, std=1.0),
            "MG3": MGScore(mean=mg2 / 2, std=1.0),
            "MG4": MGScore(mean=mg2 / 4, std=1.0),
            "MG5": MGScore(mean=oa, std=0.5),
        },
        object_accuracy=oa,
        attn_miou=miou,
        metadata=EvalMetadata(
            seed=0,
            checkpoint="/runs/model.pt",
            suite_hash="abc",
            n_prompts=100,
            rounds=3,
            sampler=SamplerConfig(),
            miou_layer="dec.32",
            miou_timestep=500,
            miou_threshold=0.4,
        ),
    )


def _write_run(runs: Path, seed: int, preset: str, values: tuple[float, float, float, float]) -> None:
    miou, mg2, oa, denoise = values
    directory = run_dir(runs, seed, preset)
    write_json(directory / "eval" / "eval_report.json", _report(miou, mg2, oa).model_dump(mode="json"))
    for step in range(1, 4):
        append_jsonl(
            directory / "metrics.jsonl",
            {"step": step, "denoise": denoise, "token_per_layer": {}, "pixel_per_layer": {}, "total": denoise},
        )


def _write_experiment(runs: Path, per_seed: dict[int, dict[str, tuple]]) -> None:
    for seed, presets in per_seed.items():
        for preset, values in presets.items():
            _write_run(runs, seed, preset, values)


def _scores(preset: str, seed: int, miou: float | None, mg2=40.0, oa=2.0, denoise=0.1) -> RunScores:
    return RunScores(
        preset=preset, seed=seed, attn_miou=miou, mg2=mg2, object_accuracy=oa, final_denoise=denoise
    )


class TestFinalDenoise:
    def test_mean_of_tail(self, tmp_path):
        path = tmp_path / "metrics.jsonl"
        for step, value in enumerate([9.0, 1.0, 2.0, 3.0], start=1):
            append_jsonl(path, {"step": step, "denoise": value})
        assert final_denoise(path, window=3) == pytest.approx(2.0)
        assert final_denoise(path, window=100) == pytest.approx(3.75)

    def test_empty_log(self, tmp_path):
        path = tmp_path / "metrics.jsonl"
        path.write_text("")
        with pytest.raises(ValueError, match="no metrics"):
            final_denoise(path)


class TestGroundingCriteria:
    def test_all_pass(self):
        results = grounding_criteria(
            _scores("ldm-only", 0, 0.30, 40.0, 2.0, 0.100),
            _scores("tokencompose", 0, 0.36, 41.0, 2.0, 0.119),
        )
        assert [r.name for r in results] == [
            "attn_miou_gain",
            "mg2_not_worse",
            "object_accuracy_not_worse",
            "denoise_within_bound",
        ]
        assert all(r.passed for r in results)

    def test_small_gain_fails(self):
        results = grounding_criteria(_scores("ldm-only", 0, 0.30), _scores("tokencompose", 0, 0.34))
        assert {r.name: r.passed for r in results}["attn_miou_gain"] is False

    def test_worse_mg2_and_oa_fail(self):
        results = grounding_criteria(
            _scores("ldm-only", 0, 0.30, mg2=50.0, oa=5.0),
            _scores("tokencompose", 0, 0.40, mg2=49.0, oa=4.0),
        )
        verdicts = {r.name: r.passed for r in results}
        assert verdicts["mg2_not_worse"] is False
        assert verdicts["object_accuracy_not_worse"] is False

    @pytest.mark.parametrize("denoise,passed", [(0.121, False), (0.079, False), (0.081, True)])
    def test_denoise_bound_both_ways(self, denoise, passed):
        results = grounding_criteria(
            _scores("ldm-only", 0, 0.30, denoise=0.1), _scores("tokencompose", 0, 0.40, denoise=denoise)
        )
        assert {r.name: r.passed for r in results}["denoise_within_bound"] is passed

    def test_needs_held_out_scores(self):
        with pytest.raises(ValueError, match="without a held-out set"):
            grounding_criteria(_scores("ldm-only", 0, None), _scores("tokencompose", 0, 0.4))


class TestAblationCriteria:
    def _by_seed(self, rows: dict[int, tuple[float, float, float]]) -> dict[int, dict[str, RunScores]]:
        return {
            seed: {
                preset: _scores(preset, seed, miou)
                for preset, miou in zip(("ldm-only", "token-only", "tokencompose"), values)
            }
            for seed, values in rows.items()
        }

    def test_two_of_three_agree(self):
        by_seed = self._by_seed({0: (0.3, 0.35, 0.4), 1: (0.3, 0.33, 0.33), 2: (0.3, 0.29, 0.2)})
        results = {r.name: r for r in ablation_criteria(by_seed)}
        assert results["token_only_beats_baseline"].passed
        assert results["tokencompose_matches_token_only"].passed
        assert "[0, 1]" in results["token_only_beats_baseline"].detail

    def test_one_of_three_fails(self):
        by_seed = self._by_seed({0: (0.3, 0.35, 0.4), 1: (0.3, 0.3, 0.2), 2: (0.3, 0.29, 0.2)})
        results = {r.name: r.passed for r in ablation_criteria(by_seed)}
        assert results["token_only_beats_baseline"] is False
        assert results["tokencompose_matches_token_only"] is False

    def test_min_agree_out_of_range(self):
        by_seed = self._by_seed({0: (0.3, 0.35, 0.4)})
        with pytest.raises(ConfigurationError):
            ablation_criteria(by_seed, min_agree=2)


class TestCheckExperiment:
    def test_passing_runs(self, tmp_path):
        _write_experiment(tmp_path, {seed: PASSING for seed in (0, 1, 2)})
        summary = check_experiment(tmp_path, [0, 1, 2])
        assert summary.passed
        assert summary.failed == []
        assert len(summary.runs) == 9
        assert len(summary.criteria) == 6

    def test_failing_seed_majority(self, tmp_path):
        flat = dict(PASSING, **{"token-only": (0.29, 42.0, 3.0, 0.104)})
        _write_experiment(tmp_path, {0: PASSING, 1: flat, 2: flat})
        summary = check_experiment(tmp_path, [0, 1, 2])
        assert summary.failed == ["token_only_beats_baseline"]

    def test_missing_run(self, tmp_path):
        _write_experiment(tmp_path, {0: PASSING})
        with pytest.raises(FileNotFoundError, match="seed 1"):
            check_experiment(tmp_path, [0, 1])


class TestCheckCommand:
    def test_writes_summary_and_passes(self, tmp_path):
        _write_experiment(tmp_path, {seed: PASSING for seed in (0, 1, 2)})
        assert main(["check", "--runs", str(tmp_path)]) == EXIT_OK
        summary = ExperimentSummary.model_validate_json((tmp_path / "experiment_check.json").read_text())
        assert summary.seeds == [0, 1, 2]
        assert (tmp_path / "run_manifest.json").is_file()

    def test_failure_exit_code(self, tmp_path):
        weak = dict(PASSING, tokencompose=(0.31, 45.0, 4.0, 0.105))
        _write_experiment(tmp_path, {0: weak})
        assert main(["check", "--runs", str(tmp_path), "--seeds", "0"]) == EXIT_RUNTIME
        summary = ExperimentSummary.model_validate_json((tmp_path / "experiment_check.json").read_text())
        assert "attn_miou_gain" in summary.failed

    def test_bad_min_agree(self, tmp_path):
        _write_experiment(tmp_path, {0: PASSING})
        code = main(["check", "--runs", str(tmp_path), "--seeds", "0", "--min-agree", "3"])
        assert code == EXIT_USAGE


@pytest.mark.slow
@pytest.mark.skipif(
    "TC_EXPERIMENT_RUNS" not in os.environ,
    reason="set TC_EXPERIMENT_RUNS to the directory run-experiment.sh wrote",
)
class TestDeskScaleExperiment:
    def test_thresholds(self):
        summary = check_experiment(Path(os.environ["TC_EXPERIMENT_RUNS"]), [0, 1, 2])
        details = {c.name: c.detail for c in summary.criteria}
        assert summary.passed, details
