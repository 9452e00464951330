from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import torch
from tqdm import tqdm

from src.data.render import GroundedSample
from src.data.tensors import collate
from src.errors import ShapeMismatchError, TrainingDivergedError
from src.evaluation.segmentation import attention_miou
from src.losses.grounding import LossBreakdown, TokenGroundingSet, tokencompose_loss
from src.model.checkpoint import ToyLDM, save_checkpoint
from src.model.objective import denoise_loss
from src.schemas.training import TrainConfig
from src.utils.files import append_jsonl
from src.utils.seeding import torch_generator

METRICS_FILE = "metrics.jsonl"
EVAL_METRICS_FILE = "eval_metrics.jsonl"
FINAL_CHECKPOINT = "model.pt"

# second component of the held-out generator seed, (run seed, stream)
HELD_OUT_STREAM = 1


def merge_breakdowns(parts: Sequence[LossBreakdown]) -> LossBreakdown:
    """Average of the micro-batch breakdowns of one optimizer step."""
    count = len(parts)

    def mean_layers(attr: str) -> dict[str, float]:
        layers = getattr(parts[0], attr)
        return {k: sum(getattr(p, attr)[k] for p in parts) / count for k in layers}

    return LossBreakdown(
        denoise=sum(p.denoise for p in parts) / count,
        token_per_layer=mean_layers("token_per_layer"),
        pixel_per_layer=mean_layers("pixel_per_layer"),
        total=sum(p.total for p in parts) / count,
    )


@dataclass
class TrainResult:
    steps: int
    checkpoint: Path
    metrics_path: Path
    history: list[LossBreakdown] = field(default_factory=list)
    evaluations: list[dict[str, float]] = field(default_factory=list)

    @property
    def final(self) -> LossBreakdown | None:
        return self.history[-1] if self.history else None


class Trainer:
    """Joint denoising + grounding optimization over an in-memory dataset.

    All randomness (batch indices, condition dropout, timesteps, noise) comes
    from one CPU generator seeded by ``config.seed``. Held-out evaluation draws
    from its own generators and leaves the training stream untouched.
    """

    def __init__(
        self,
        ldm: ToyLDM,
        samples: Sequence[GroundedSample],
        config: TrainConfig,
        out_dir: Path,
        device: str = "cpu",
        eval_samples: Sequence[GroundedSample] = (),
    ) -> None:
        self.logger = logging.getLogger("trainer")
        if not samples:
            raise ValueError("training needs at least one sample")
        resolution = (ldm.config.base_resolution, ldm.config.base_resolution)
        mismatched = [s.id for s in samples if s.resolution != resolution]
        if mismatched:
            raise ShapeMismatchError(
                f"{len(mismatched)} samples not at {resolution} (first: {mismatched[0]})"
            )
        ldm.config.check_layers(config.loss.layer_ids)

        held_out = list(eval_samples)[: config.eval_samples]
        if config.eval_every > 0:
            ldm.config.check_layers([config.eval_layer])
            if not held_out:
                self.logger.warning(
                    "eval_every is set but no held-out samples were given; skipping evaluation"
                )
        wrong = [s.id for s in held_out if s.resolution != resolution]
        if wrong:
            raise ShapeMismatchError(
                f"{len(wrong)} held-out samples not at {resolution} (first: {wrong[0]})"
            )

        self.ldm = ldm.to(device)
        self.samples = list(samples)
        self.eval_samples = held_out
        self.config = config
        self.device = device
        self.out_dir = Path(out_dir)
        self.metrics_path = self.out_dir / METRICS_FILE
        self.metrics_path.unlink(missing_ok=True)
        self.eval_metrics_path = self.out_dir / EVAL_METRICS_FILE
        self.eval_metrics_path.unlink(missing_ok=True)
        self.last_checkpoint: Path | None = None
        self.step = 0

        self.optimizer = torch.optim.AdamW(
            ldm.model.parameters(),
            lr=config.learning_rate,
            weight_decay=config.weight_decay,
        )
        self.generator = torch_generator(config.seed)
        if config.cond_dropout == 0:
            self.logger.warning(
                "Condition dropout is 0; the unconditional branch used by guidance stays untrained"
            )

    def _micro_batch(self) -> tuple[torch.Tensor, list[str], list[TokenGroundingSet]]:
        size = self.config.batch_size
        indices = torch.randint(len(self.samples), (size,), generator=self.generator)
        images, captions, groundings = collate([self.samples[int(i)] for i in indices])

        dropped = torch.rand(size, generator=self.generator) < self.config.cond_dropout
        for index in torch.nonzero(dropped).flatten().tolist():
            captions[index] = ""
            groundings[index] = TokenGroundingSet.empty(groundings[index].resolution)
        self.ldm.model.count_null_conditioning(int(dropped.sum()))
        return images, captions, groundings

    def train_step(self) -> LossBreakdown:
        model = self.ldm.model
        model.train()
        self.optimizer.zero_grad(set_to_none=True)

        parts: list[LossBreakdown] = []
        accum = self.config.grad_accum_steps
        for _ in range(accum):
            images, captions, groundings = self._micro_batch()
            t = self.ldm.schedule.sample_timesteps(len(captions), self.generator)
            noise = torch.randn(images.shape, generator=self.generator)

            context = self.ldm.encoder.encode(captions)
            denoise, maps = denoise_loss(
                images.to(self.device),
                context,
                t.to(self.device),
                noise.to(self.device),
                model,
                self.ldm.schedule,
                layer_ids=self.config.loss.layer_ids,
            )
            total, breakdown = tokencompose_loss(
                denoise, maps, [g.to(self.device) for g in groundings], self.config.loss
            )
            (total / accum).backward()
            parts.append(breakdown)

        merged = merge_breakdowns(parts)
        if not merged.finite:
            self.optimizer.zero_grad(set_to_none=True)
            raise TrainingDivergedError(
                self.step + 1, str(self.last_checkpoint) if self.last_checkpoint else None
            )
        self.optimizer.step()
        self.step += 1
        return merged

    @torch.no_grad()
    def evaluate(self) -> dict[str, float]:
        """Held-out denoising loss and attention mIoU at the current step.

        Timesteps and noise are seeded by the run seed alone, so every
        evaluation of a run scores the same noisy inputs.
        """
        model = self.ldm.model
        model.eval()
        generator = torch_generator(self.config.seed, HELD_OUT_STREAM)
        images, captions, _ = collate(self.eval_samples)
        t = self.ldm.schedule.sample_timesteps(len(captions), generator)
        noise = torch.randn(images.shape, generator=generator)
        held_out_denoise, _ = denoise_loss(
            images.to(self.device),
            self.ldm.encoder.encode(captions),
            t.to(self.device),
            noise.to(self.device),
            model,
            self.ldm.schedule,
            layer_ids=[],
        )
        record: dict[str, float] = {
            "step": self.step,
            "held_out_denoise": float(held_out_denoise),
        }
        if any(s.groundings for s in self.eval_samples):
            miou = attention_miou(
                self.ldm, self.eval_samples, layer_id=self.config.eval_layer, seed=self.config.seed
            )
            record["attn_miou"] = miou.miou
        append_jsonl(self.eval_metrics_path, record)

        message = f"eval at step {self.step}: held_out_denoise={record['held_out_denoise']:.5f}"
        if "attn_miou" in record:
            message += f" attn_miou={record['attn_miou']:.4f}"
        self.logger.info(message)
        return record

    def save(self, path: Path) -> Path:
        save_checkpoint(
            path,
            self.ldm,
            self.step,
            optimizer=self.optimizer,
            train_config=self.config.model_dump(mode="json"),
        )
        self.last_checkpoint = path
        return path

    def fit(self, steps: int | None = None, progress: bool = False) -> TrainResult:
        total_steps = steps if steps is not None else self.config.steps
        history: list[LossBreakdown] = []
        evaluations: list[dict[str, float]] = []
        self.logger.info(
            f"Training {total_steps} steps: lambda={self.config.loss.lambda_token}, "
            f"gamma={self.config.loss.gamma_pixel}, layers={self.config.loss.layer_ids}"
        )
        if not self.config.loss.grounding_enabled:
            self.logger.info("Grounding weights are zero; optimizing the denoising loss only")
        evaluating = self.config.eval_every > 0 and bool(self.eval_samples)

        iterator = tqdm(range(total_steps), desc="training", leave=False) if progress else range(total_steps)
        for _ in iterator:
            try:
                breakdown = self.train_step()
            except TrainingDivergedError as e:
                self.logger.error(str(e))
                raise
            history.append(breakdown)
            append_jsonl(self.metrics_path, breakdown.to_record(self.step))

            if self.step % self.config.log_every == 0:
                self.logger.info(
                    f"step {self.step}: total={breakdown.total:.5f} denoise={breakdown.denoise:.5f}"
                )
            if evaluating and self.step % self.config.eval_every == 0:
                evaluations.append(self.evaluate())
            if self.step % self.config.checkpoint_every == 0:
                self.save(self.out_dir / "checkpoints" / f"step-{self.step:06d}.pt")

        final = self.save(self.out_dir / FINAL_CHECKPOINT)
        return TrainResult(
            steps=self.step,
            checkpoint=final,
            metrics_path=self.metrics_path,
            history=history,
            evaluations=evaluations,
        )
