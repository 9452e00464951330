from __future__ import annotations

import argparse
import asyncio
import logging
from pathlib import Path
from typing import Any

from PIL import Image

from src.cli.runconfig import RunRecord, load_config_file, resolve
from src.config import get_settings
from src.data.dataset import generate_dataset, load_dataset, read_manifest
from src.data.registry import DEFAULT_REGISTRY, get_registry
from src.data.render import GroundedSample
from src.data.tensors import tensor_to_image
from src.evaluation.experiment import check_experiment
from src.evaluation.harness import EvaluationHarness, EvaluationOutcome
from src.evaluation.multigen import build_multigen, load_suite, save_suite
from src.evaluation.plots import (
    plot_attention_heatmaps,
    plot_category_bars,
    plot_loss_curves,
    plot_mg_scores,
    save_image_grid,
)
from src.evaluation.segmentation import read_attention
from src.model.checkpoint import ToyLDM, build_toy_ldm, load_checkpoint, save_checkpoint
from src.model.sampler import sample
from src.model.text_encoder import tokenize
from src.schemas.data import DatasetConfig, DetectorThresholds
from src.schemas.evaluation import EvalConfig, EvalReport, SamplerConfig
from src.schemas.model import ModelConfig
from src.schemas.training import LossWeights, TrainConfig
from src.training.presets import get_preset, resolve_loss_layers
from src.training.trainer import FINAL_CHECKPOINT, METRICS_FILE, Trainer
from src.utils.files import read_jsonl, write_json
from src.utils.seeding import seed_everything

logger = logging.getLogger("cli")

HEATMAP_SAMPLES = 4


def _sampler_config(args: argparse.Namespace, file_cfg: dict[str, Any]) -> SamplerConfig:
    return resolve(
        SamplerConfig,
        file_cfg.get("sample"),
        sampler=args.sampler,
        steps=args.steps,
        guidance_scale=args.guidance,
    )


def cmd_gen_data(args: argparse.Namespace) -> int:
    file_cfg = load_config_file(args.config)
    cfg = resolve(
        DatasetConfig,
        file_cfg.get("data"),
        count=args.n,
        seed=args.seed,
        id_prefix=args.id_prefix,
        resolution=args.resolution,
    )
    registry = get_registry(cfg.categories)
    run = RunRecord("gen-data", args.out)
    run.config = {"data": cfg.model_dump(mode="json")}
    run.seeds = {"data": cfg.seed}

    manifest = generate_dataset(
        cfg.count,
        registry,
        cfg.seed,
        run.out_dir,
        id_prefix=cfg.id_prefix,
        resolution=cfg.resolution,
        max_objects=cfg.max_objects,
        thresholds=DetectorThresholds(),
        progress=True,
    )
    run.write()
    logger.info(f"Dataset with {manifest.count} samples at {run.out_dir}")
    return 0


def _loss_weights(
    args: argparse.Namespace, model_config: ModelConfig, file_train: dict[str, Any]
) -> LossWeights:
    layers = resolve_loss_layers(model_config, args.layers)
    if args.preset is not None:
        return get_preset(args.preset, layers)
    values = dict(file_train.get("loss", {}))
    if layers is not None:
        values["layer_ids"] = layers
    weights = resolve(LossWeights, values)
    model_config.check_layers(weights.layer_ids)
    return weights


def cmd_train(args: argparse.Namespace) -> int:
    settings = get_settings()
    file_cfg = load_config_file(args.config)
    model_config = resolve(ModelConfig, file_cfg.get("model"), seed=args.model_seed)
    file_train = dict(file_cfg.get("train", {}))
    loss = _loss_weights(args, model_config, file_train)
    file_train.pop("loss", None)
    train_config = resolve(
        TrainConfig,
        file_train,
        steps=args.steps,
        batch_size=args.batch_size,
        grad_accum_steps=args.grad_accum,
        learning_rate=args.lr,
        cond_dropout=args.cond_dropout,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        eval_every=args.eval_every,
        loss=loss,
    )

    run = RunRecord("train", args.out)
    run.add_path("data", args.data)
    run.config = {
        "model": model_config.model_dump(mode="json"),
        "train": train_config.model_dump(mode="json"),
        "preset": args.preset,
        "init_only": args.init_only,
    }
    run.seeds = {"model": model_config.seed, "train": train_config.seed}

    seed_everything(train_config.seed)
    read_manifest(args.data)
    samples = list(load_dataset(args.data, resolution=model_config.base_resolution))
    words = set(DEFAULT_REGISTRY.words) | {w for s in samples for w in tokenize(s.caption)}
    ldm = build_toy_ldm(model_config, words)

    if args.init_only:
        path = save_checkpoint(run.out_dir / FINAL_CHECKPOINT, ldm, step=0)
        run.add_path("checkpoint", path)
        run.write()
        return 0

    held_out: list[GroundedSample] = []
    if args.held_out:
        run.add_path("held_out", args.held_out)
        held_out = list(load_dataset(args.held_out, resolution=model_config.base_resolution))

    trainer = Trainer(
        ldm,
        samples,
        train_config,
        run.out_dir,
        device=settings.resolve_device(),
        eval_samples=held_out,
    )
    result = trainer.fit(progress=True)
    run.add_path("checkpoint", result.checkpoint)
    run.add_path("metrics", result.metrics_path)
    if result.evaluations:
        run.add_path("eval_metrics", trainer.eval_metrics_path)
    run.write()
    if result.final is not None:
        logger.info(f"Finished {result.steps} steps; final total loss {result.final.total:.5f}")
    return 0


def _slug(text: str) -> str:
    return "_".join(tokenize(text))[:60] or "empty"


def cmd_sample(args: argparse.Namespace) -> int:
    settings = get_settings()
    file_cfg = load_config_file(args.config)
    sampler_config = _sampler_config(args, file_cfg)
    checkpoint = load_checkpoint(args.checkpoint, map_location=settings.resolve_device())
    ldm = checkpoint.ldm
    ldm.model.eval()

    run = RunRecord("sample", args.out)
    run.add_path("checkpoint", args.checkpoint)
    run.config = {"sample": sampler_config.model_dump(mode="json"), "prompts": list(args.prompt)}
    run.seeds = {"sample": args.seed}

    prompts: list[str] = []
    seeds: list[int] = []
    for prompt_index, prompt in enumerate(args.prompt):
        for image_index in range(args.num_images):
            prompts.append(prompt)
            seeds.append(args.seed + prompt_index * args.num_images + image_index)

    images = sample(
        ldm.model, ldm.encoder, ldm.schedule, prompts, seeds, sampler_config, progress=True
    )
    arrays = [tensor_to_image(x) for x in images]

    for index, (prompt, seed, array) in enumerate(zip(prompts, seeds, arrays)):
        path = run.out_dir / f"{index:03d}_{_slug(prompt)}_seed{seed}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(array).save(path)
    save_image_grid(arrays, run.out_dir / "grid.png", titles=prompts)
    run.write()
    logger.info(f"Wrote {len(arrays)} images to {run.out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings = get_settings()
    file_cfg = load_config_file(args.config)
    sampler_config = _sampler_config(args, file_cfg)
    eval_config = resolve(
        EvalConfig,
        file_cfg.get("eval"),
        n_prompts=args.n_prompts,
        rounds=args.rounds,
        seed=args.seed,
        jobs=args.jobs,
        batch_size=args.batch_size,
        miou_layer=args.miou_layer,
        miou_timestep=args.miou_timestep,
        miou_samples=args.miou_samples,
        gate_samples=args.gate_samples,
    )
    run = RunRecord("eval", args.out)
    run.config = {
        "sample": sampler_config.model_dump(mode="json"),
        "eval": eval_config.model_dump(mode="json"),
    }
    run.seeds = {"eval": eval_config.seed}
    seed_everything(eval_config.seed)

    checkpoint = load_checkpoint(args.checkpoint, map_location=settings.resolve_device())
    run.add_path("checkpoint", checkpoint.path)
    ldm = checkpoint.ldm
    ldm.config.check_layers([eval_config.miou_layer])
    registry = DEFAULT_REGISTRY

    suite_path = Path(args.suite) if args.suite else run.out_dir / "suite.json"
    if args.build_suite:
        suite = build_multigen(
            registry.names,
            eval_config.n_prompts,
            eval_config.seed,
            categories_per_prompt=eval_config.categories_per_prompt,
            rounds=eval_config.rounds,
        )
        save_suite(suite, suite_path)
    else:
        if not suite_path.is_file():
            raise FileNotFoundError(f"Suite file not found: {suite_path} (use --build-suite)")
        suite = load_suite(suite_path)
        if args.rounds is not None:
            suite = suite.model_copy(update={"rounds": eval_config.rounds})
    run.add_path("suite", suite_path)

    thresholds = DetectorThresholds()
    held_out: list[GroundedSample] = []
    if args.held_out:
        run.add_path("held_out", args.held_out)
        thresholds = read_manifest(args.held_out).detector
        held_out = list(load_dataset(args.held_out, resolution=ldm.config.base_resolution))

    harness = EvaluationHarness(ldm, registry, sampler_config, eval_config, thresholds)
    outcome = asyncio.run(harness.evaluate(suite, held_out, checkpoint=str(checkpoint.path)))
    report = outcome.report

    report_path = run.out_dir / "eval_report.json"
    write_json(report_path, report.model_dump(mode="json"))
    run.add_path("report", report_path)
    _write_eval_plots(args, run.out_dir, report, outcome, ldm, held_out, eval_config)
    run.write()
    logger.info(f"Report written to {report_path} (hash {report.report_hash[:12]})")
    return 0


def _report_label(path: Path) -> str:
    """Run directory name of a report, skipping a trailing ``eval`` folder."""
    parent = path.resolve().parent
    if parent.name == "eval" and parent.parent.name:
        parent = parent.parent
    return parent.name or path.stem


def _write_eval_plots(
    args: argparse.Namespace,
    out_dir: Path,
    report: EvalReport,
    outcome: EvaluationOutcome,
    ldm: ToyLDM,
    held_out: list[GroundedSample],
    eval_config: EvalConfig,
) -> None:
    reports = {args.label: report}
    for other in args.compare or []:
        path = Path(other)
        reports[_report_label(path)] = EvalReport.model_validate_json(
            path.read_text(encoding="utf-8")
        )
    plot_mg_scores(reports, out_dir / "mg_scores.png")
    if report.per_category_success:
        plot_category_bars(
            report.per_category_success, out_dir / "category_success.png", "success rate (%)"
        )
    if outcome.segmentation is not None:
        plot_category_bars(
            outcome.segmentation.per_category, out_dir / "miou_per_category.png", "attention IoU"
        )
        shown = held_out[:HEATMAP_SAMPLES]
        records = read_attention(
            ldm, shown, eval_config.miou_layer, outcome.segmentation.timestep, eval_config.seed
        )
        plot_attention_heatmaps(shown, records, out_dir / "attention_heatmaps.png")

    metrics = Path(args.metrics) if args.metrics else Path(args.checkpoint).parent / METRICS_FILE
    if metrics.is_file():
        plot_loss_curves(read_jsonl(metrics), out_dir / "loss_curves.png")
    if outcome.preview_images:
        indices = sorted(outcome.preview_images)[:16]
        save_image_grid([outcome.preview_images[i] for i in indices], out_dir / "samples_round0.png")


def cmd_check(args: argparse.Namespace) -> int:
    run = RunRecord("check", args.out or args.runs)
    run.add_path("runs", args.runs)
    run.config = {
        "seeds": list(args.seeds),
        "min_miou_gain": args.min_miou_gain,
        "max_denoise_ratio": args.max_denoise_ratio,
        "min_agree": args.min_agree,
        "window": args.window,
    }
    summary = check_experiment(
        Path(args.runs),
        args.seeds,
        min_miou_gain=args.min_miou_gain,
        max_denoise_ratio=args.max_denoise_ratio,
        min_agree=args.min_agree,
        window=args.window,
    )
    summary_path = run.out_dir / "experiment_check.json"
    write_json(summary_path, summary.model_dump(mode="json"))
    run.add_path("summary", summary_path)
    run.write()
    if not summary.passed:
        logger.error(f"Experiment checks failed: {', '.join(summary.failed)}")
        return 1
    logger.info(f"All {len(summary.criteria)} experiment checks passed")
    return 0
