from __future__ import annotations

import pytest

from src.errors import ConfigurationError
from src.evaluation import build_multigen, format_prompt, load_suite, mg_scores, save_suite
from src.evaluation.multigen import incidence_counts
from src.schemas.evaluation import MultiGenPrompt, MultiGenSuite
from src.utils.seeding import numpy_rng

POOL = [f"color{i} shape{i}" for i in range(10)]


def _suite(n_prompts: int, rounds: int, seed: int = 0) -> MultiGenSuite:
    return build_multigen(POOL, n_prompts, seed, rounds=rounds)


def _detect(suite: MultiGenSuite, counts: list[list[int]]) -> list[list[set[str]]]:
    """Detections where prompt p of round r finds its first counts[r][p] categories."""
    return [
        [set(prompt.categories[:c]) for prompt, c in zip(suite.prompts, row)]
        for row in counts
    ]


class TestPrompts:
    def test_template(self):
        assert (
            format_prompt(["Red circle", "blue square", "green triangle", "yellow ring", "gray crescent"])
            == "A photo of red circle, blue square, green triangle, yellow ring, and gray crescent."
        )

    def test_two_categories(self):
        assert format_prompt(["red circle", "blue square"]) == "A photo of red circle and blue square."

    def test_prompts_are_distinct_draws(self):
        suite = _suite(50, 10)
        for prompt in suite.prompts:
            assert len(prompt.categories) == 5
            assert len(set(prompt.categories)) == 5
            assert set(prompt.categories) <= set(POOL)

    def test_pool_of_five_uses_everything(self):
        suite = build_multigen(POOL[:5], 5, seed=2)
        for prompt in suite.prompts:
            assert sorted(prompt.categories) == sorted(POOL[:5])

    def test_seed_fixes_suite(self):
        assert _suite(20, 10, seed=4).suite_hash == _suite(20, 10, seed=4).suite_hash
        assert _suite(20, 10, seed=4).suite_hash != _suite(20, 10, seed=5).suite_hash

    def test_small_pool(self):
        with pytest.raises(ConfigurationError):
            build_multigen(POOL[:4], 10, seed=0)

    def test_duplicate_pool(self):
        with pytest.raises(ConfigurationError):
            build_multigen([*POOL[:5], POOL[0]], 10, seed=0)

    def test_save_and_load(self, tmp_path):
        suite = _suite(8, 3)
        save_suite(suite, tmp_path / "suite.json")
        assert load_suite(tmp_path / "suite.json").suite_hash == suite.suite_hash

    def test_prompt_rejects_repeats(self):
        with pytest.raises(ValueError):
            MultiGenPrompt(categories=["a b", "a b"], text="")


class TestScores:
    def test_hand_example(self):
        suite = _suite(2, 2)
        scores = mg_scores(_detect(suite, [[5, 3], [2, 4]]), suite)
        expected = {"MG2": (100.0, 0.0), "MG3": (75.0, 25.0), "MG4": (50.0, 0.0), "MG5": (25.0, 25.0)}
        for key, (mean, std) in expected.items():
            assert scores.mg[key].mean == pytest.approx(mean)
            assert scores.mg[key].std == pytest.approx(std)
        assert scores.mg_per_round["MG5"] == [50.0, 0.0]
        assert scores.object_accuracy == pytest.approx(25.0)

    def test_everything_detected(self):
        suite = _suite(6, 3)
        scores = mg_scores(_detect(suite, [[5] * 6] * 3), suite)
        assert all(score.mean == 100.0 and score.std == 0.0 for score in scores.mg.values())
        assert scores.object_accuracy == 100.0
        assert all(rate == 100.0 for rate in scores.per_category_success.values())

    def test_nothing_detected(self):
        suite = _suite(4, 2)
        scores = mg_scores(_detect(suite, [[0] * 4] * 2), suite)
        assert all(score.mean == 0.0 for score in scores.mg.values())
        assert scores.object_accuracy == 0.0

    def test_unprompted_detections_do_not_count(self):
        suite = _suite(1, 1)
        others = set(POOL) - set(suite.prompts[0].categories)
        scores = mg_scores([[others]], suite)
        assert scores.mg["MG2"].mean == 0.0

    def test_against_brute_force(self):
        rng = numpy_rng(42)
        for trial in range(200):
            n_prompts = int(rng.integers(1, 6))
            rounds = int(rng.integers(1, 5))
            suite = _suite(n_prompts, rounds, seed=trial)
            counts = rng.integers(0, 6, size=(rounds, n_prompts)).tolist()
            scores = mg_scores(_detect(suite, counts), suite)

            for k in range(2, 6):
                rates = [100.0 * sum(c >= k for c in row) / n_prompts for row in counts]
                mean = sum(rates) / rounds
                std = (sum((r - mean) ** 2 for r in rates) / rounds) ** 0.5
                assert scores.mg[f"MG{k}"].mean == pytest.approx(mean)
                assert scores.mg[f"MG{k}"].std == pytest.approx(std, abs=1e-9)

            means = [scores.mg[f"MG{k}"].mean for k in range(2, 6)]
            assert means == sorted(means, reverse=True)
            assert scores.object_accuracy == pytest.approx(scores.mg["MG5"].mean)

    def test_missing_round(self):
        suite = _suite(3, 4)
        with pytest.raises(ValueError, match="rounds"):
            incidence_counts(_detect(suite, [[1, 1, 1]] * 3), suite)

    def test_prompt_count_mismatch(self):
        suite = _suite(3, 1)
        with pytest.raises(ValueError):
            incidence_counts([[set(), set()]], suite)
