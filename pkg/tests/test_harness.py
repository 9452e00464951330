from __future__ import annotations

import pytest

from src.errors import DetectorGateError
from src.evaluation import EvaluationHarness, build_multigen
from src.schemas.data import DetectorThresholds
from src.schemas.evaluation import EvalConfig, EvalReport, SamplerConfig


def _harness(ldm, registry, jobs: int = 1, **overrides) -> EvaluationHarness:
    values = dict(
        n_prompts=3,
        rounds=2,
        seed=5,
        jobs=jobs,
        batch_size=2,
        gate_samples=5,
        gate_accuracy=0.0,
        miou_samples=3,
    )
    values.update(overrides)
    return EvaluationHarness(
        ldm,
        registry,
        SamplerConfig(steps=2, guidance_scale=2.0),
        EvalConfig(**values),
    )


@pytest.fixture
def suite(registry):
    return build_multigen(registry.names, 3, seed=5, rounds=2)


class TestEvaluationHarness:
    @pytest.mark.asyncio
    async def test_report_validates(self, tiny_ldm, registry, suite, rendered_samples):
        outcome = await _harness(tiny_ldm, registry).evaluate(
            suite, rendered_samples, checkpoint="model.pt"
        )
        report = EvalReport.model_validate(outcome.report.model_dump(mode="json"))
        assert sorted(report.mg) == ["MG2", "MG3", "MG4", "MG5"]
        assert all(len(rates) == 2 for rates in report.mg_per_round.values())
        assert report.object_accuracy == pytest.approx(report.mg["MG5"].mean)
        assert report.attn_miou is not None and 0.0 <= report.attn_miou <= 1.0
        assert report.metadata.suite_hash == suite.suite_hash
        assert report.metadata.rounds == 2
        assert report.metadata.miou_tokens == sum(len(s.groundings) for s in rendered_samples[:3])
        assert sorted(outcome.preview_images) == [0, 1, 2]

    @pytest.mark.asyncio
    async def test_jobs_do_not_change_the_report(self, tiny_ldm, registry, suite):
        one = await _harness(tiny_ldm, registry, jobs=1).run_multigen(suite)
        two = await _harness(tiny_ldm, registry, jobs=2).run_multigen(suite)
        assert one[0] == two[0]
        for index, image in one[1].items():
            assert (image == two[1][index]).all()

    @pytest.mark.asyncio
    async def test_without_held_out_set(self, tiny_ldm, registry, suite):
        outcome = await _harness(tiny_ldm, registry).evaluate(suite)
        assert outcome.segmentation is None
        assert outcome.report.attn_miou is None
        assert outcome.report.metadata.miou_timestep == tiny_ldm.schedule.T // 2

    @pytest.mark.asyncio
    async def test_detector_gate_blocks_evaluation(self, tiny_ldm, registry, suite):
        harness = _harness(tiny_ldm, registry, gate_accuracy=0.5)
        harness.thresholds = DetectorThresholds(min_area=10_000)
        with pytest.raises(DetectorGateError):
            await harness.evaluate(suite)

    def test_item_seeds_are_distinct(self, tiny_ldm, registry):
        harness = _harness(tiny_ldm, registry)
        seeds = {harness.item_seed(r, p) for r in range(10) for p in range(100)}
        assert len(seeds) == 1000
