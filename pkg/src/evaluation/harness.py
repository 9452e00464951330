from __future__ import annotations

import asyncio
import copy
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from src.data.registry import CategoryRegistry
from src.data.render import GroundedSample
from src.data.tensors import tensor_to_image
from src.evaluation.detector import oracle_detect, validate_detector
from src.evaluation.multigen import MultiGenScores, mg_scores
from src.evaluation.segmentation import AttentionMIoU, attention_miou
from src.model.checkpoint import ToyLDM
from src.model.sampler import sample
from src.schemas.data import DetectorThresholds
from src.schemas.evaluation import EvalConfig, EvalMetadata, EvalReport, MultiGenSuite, SamplerConfig
from src.utils.seeding import derive_seed


@dataclass
class BatchResult:
    round_index: int
    prompt_indices: list[int]
    detections: list[set[str]]
    images: list[np.ndarray] = field(default_factory=list)


@dataclass
class EvaluationOutcome:
    report: EvalReport
    scores: MultiGenScores
    segmentation: AttentionMIoU | None
    preview_images: dict[int, np.ndarray] = field(default_factory=dict)


class EvaluationHarness:
    """Samples every (round, prompt) of a suite and scores the detections.

    Batches run concurrently in worker threads, each on its own model replica
    from a pool of ``config.jobs``; results are keyed by (round, prompt) so the
    report does not depend on completion order.
    """

    def __init__(
        self,
        ldm: ToyLDM,
        registry: CategoryRegistry,
        sampler_config: SamplerConfig | None = None,
        config: EvalConfig | None = None,
        thresholds: DetectorThresholds | None = None,
    ) -> None:
        self.ldm = ldm
        self.registry = registry
        self.sampler_config = sampler_config or SamplerConfig()
        self.config = config or EvalConfig()
        self.thresholds = thresholds or DetectorThresholds()
        self.logger = logging.getLogger("evaluation.harness")

        ldm.model.eval()
        self._replicas: list[ToyLDM] = [ldm] + [
            ToyLDM(copy.deepcopy(ldm.model), copy.deepcopy(ldm.encoder), ldm.schedule)
            for _ in range(self.config.jobs - 1)
        ]
        self._semaphore = asyncio.Semaphore(self.config.jobs)

    def item_seed(self, round_index: int, prompt_index: int) -> int:
        return derive_seed(self.config.seed, round_index, prompt_index)

    def _sample_batch(
        self, replica: ToyLDM, round_index: int, prompt_indices: list[int], suite: MultiGenSuite
    ) -> BatchResult:
        captions = [suite.prompts[p].text for p in prompt_indices]
        seeds = [self.item_seed(round_index, p) for p in prompt_indices]
        images = sample(
            replica.model, replica.encoder, replica.schedule, captions, seeds, self.sampler_config
        )
        arrays = [tensor_to_image(x) for x in images]
        detections = [oracle_detect(a, self.registry, self.thresholds) for a in arrays]
        keep = arrays if round_index == 0 else []
        return BatchResult(round_index, prompt_indices, detections, keep)

    async def _run_batch(
        self, round_index: int, prompt_indices: list[int], suite: MultiGenSuite
    ) -> BatchResult:
        async with self._semaphore:
            replica = self._replicas.pop()
            try:
                return await asyncio.to_thread(
                    self._sample_batch, replica, round_index, prompt_indices, suite
                )
            finally:
                self._replicas.append(replica)

    async def run_multigen(
        self, suite: MultiGenSuite
    ) -> tuple[list[list[set[str]]], dict[int, np.ndarray]]:
        n_prompts = len(suite.prompts)
        batch = self.config.batch_size
        tasks = [
            self._run_batch(r, list(range(start, min(start + batch, n_prompts))), suite)
            for r in range(suite.rounds)
            for start in range(0, n_prompts, batch)
        ]
        self.logger.info(
            f"Sampling {suite.rounds} rounds x {n_prompts} prompts in {len(tasks)} batches "
            f"with {self.config.jobs} job(s)"
        )
        results = await asyncio.gather(*tasks)

        detections: list[list[set[str]]] = [[set() for _ in range(n_prompts)] for _ in range(suite.rounds)]
        previews: dict[int, np.ndarray] = {}
        for result in results:
            for offset, prompt_index in enumerate(result.prompt_indices):
                detections[result.round_index][prompt_index] = result.detections[offset]
                if result.images:
                    previews[prompt_index] = result.images[offset]
        return detections, previews

    async def check_detector(self) -> float:
        return await asyncio.to_thread(
            validate_detector,
            self.registry,
            self.thresholds,
            self.config.gate_samples,
            self.config.seed,
            self.ldm.config.base_resolution,
            self.config.gate_accuracy,
        )

    async def evaluate(
        self,
        suite: MultiGenSuite,
        held_out: Sequence[GroundedSample] = (),
        checkpoint: str = "",
    ) -> EvaluationOutcome:
        """Detector gate, then MultiGen scores, then attention mIoU on ``held_out``."""
        accuracy = await self.check_detector()
        detections, previews = await self.run_multigen(suite)
        scores = mg_scores(detections, suite)

        segmentation = None
        if held_out:
            segmentation = await asyncio.to_thread(
                attention_miou,
                self.ldm,
                list(held_out)[: self.config.miou_samples],
                self.config.miou_layer,
                self.config.miou_timestep,
                self.config.miou_threshold,
                self.config.seed,
            )

        timestep = segmentation.timestep if segmentation else (
            self.config.miou_timestep or self.ldm.schedule.T // 2
        )
        report = EvalReport(
            mg=scores.mg,
            mg_per_round=scores.mg_per_round,
            object_accuracy=scores.object_accuracy,
            attn_miou=segmentation.miou if segmentation else None,
            per_category_success=scores.per_category_success or None,
            metadata=EvalMetadata(
                seed=self.config.seed,
                checkpoint=checkpoint,
                suite_hash=suite.suite_hash,
                n_prompts=len(suite.prompts),
                rounds=suite.rounds,
                sampler=self.sampler_config,
                detector_accuracy=accuracy,
                miou_layer=self.config.miou_layer,
                miou_timestep=timestep,
                miou_threshold=self.config.miou_threshold,
                miou_tokens=len(segmentation.token_ious) if segmentation else 0,
                miou_skipped_samples=segmentation.skipped_samples if segmentation else 0,
            ),
        )
        self.logger.info(
            f"MG2..MG5 means: {[round(s.mean, 2) for s in scores.mg.values()]}, "
            f"OA {scores.object_accuracy:.2f}"
        )
        return EvaluationOutcome(report, scores, segmentation, previews)
