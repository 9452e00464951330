from __future__ import annotations

import argparse
import logging
from collections.abc import Callable, Sequence
from pathlib import Path

import torch

from src.cli.commands import cmd_check, cmd_eval, cmd_gen_data, cmd_sample, cmd_train
from src.config import get_settings
from src.errors import ConfigurationError
from src.training.presets import PRESET_NAMES
from src.utils.seeding import configure_determinism

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from e
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokencompose-toy",
        description="Token/pixel grounding losses on a toy text-to-image diffusion model",
    )
    parser.add_argument("--config", type=Path, default=None, help="TOML config file")
    parser.add_argument("--log-level", default=None, help="Overrides TC_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Render a synthetic grounded dataset")
    gen.add_argument("--n", type=positive_int, default=None, help="Number of samples")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--id-prefix", default=None)
    gen.add_argument("--resolution", type=positive_int, default=None)
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(handler=cmd_gen_data)

    train = sub.add_parser("train", help="Train a toy model on a grounded dataset")
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--preset", choices=PRESET_NAMES, default=None)
    train.add_argument(
        "--layers", nargs="+", default=None,
        help="Loss layer ids, or one group name (mid-dec, dec, enc-mid-dec, dec-full, all)",
    )
    train.add_argument("--steps", type=positive_int, default=None)
    train.add_argument("--batch-size", type=positive_int, default=None)
    train.add_argument("--grad-accum", type=positive_int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--cond-dropout", type=float, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--model-seed", type=int, default=None)
    train.add_argument("--checkpoint-every", type=positive_int, default=None)
    train.add_argument("--eval-every", type=int, default=None, help="Steps between held-out evaluations")
    train.add_argument("--held-out", type=Path, default=None, help="Held-out dataset for --eval-every")
    train.add_argument(
        "--init-only", action="store_true", help="Write the untrained (frozen) checkpoint and stop"
    )
    train.set_defaults(handler=cmd_train)

    for name, handler, help_text in (
        ("sample", cmd_sample, "Generate images from prompts"),
        ("eval", cmd_eval, "MultiGen, object accuracy and attention mIoU"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--checkpoint", type=Path, required=True)
        cmd.add_argument("--out", type=Path, required=True)
        cmd.add_argument("--sampler", choices=("ddim", "ancestral"), default=None)
        cmd.add_argument("--steps", type=positive_int, default=None)
        cmd.add_argument("--guidance", type=float, default=None)
        cmd.set_defaults(handler=handler)
        if name == "sample":
            cmd.add_argument("--prompt", action="append", required=True)
            cmd.add_argument("--seed", type=int, default=0)
            cmd.add_argument("--num-images", type=positive_int, default=1)
        else:
            cmd.add_argument("--suite", type=Path, default=None)
            cmd.add_argument("--build-suite", action="store_true")
            cmd.add_argument("--held-out", type=Path, default=None)
            cmd.add_argument("--n-prompts", type=positive_int, default=None)
            cmd.add_argument("--rounds", type=positive_int, default=None)
            cmd.add_argument("--jobs", type=positive_int, default=None)
            cmd.add_argument("--batch-size", type=positive_int, default=None)
            cmd.add_argument("--seed", type=int, default=None)
            cmd.add_argument("--miou-layer", default=None)
            cmd.add_argument("--miou-timestep", type=positive_int, default=None)
            cmd.add_argument("--miou-samples", type=positive_int, default=None)
            cmd.add_argument("--gate-samples", type=positive_int, default=None)
            cmd.add_argument("--metrics", type=Path, default=None)
            cmd.add_argument("--label", default="model")
            cmd.add_argument("--compare", nargs="*", default=None, help="Other eval_report.json files")
    check = sub.add_parser("check", help="Judge a finished baseline-vs-grounded experiment")
    check.add_argument("--runs", type=Path, required=True, help="Directory holding seed-<N>/<preset> runs")
    check.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    check.add_argument("--out", type=Path, default=None, help="Defaults to --runs")
    check.add_argument("--min-miou-gain", type=float, default=0.05)
    check.add_argument("--max-denoise-ratio", type=float, default=0.2)
    check.add_argument("--min-agree", type=positive_int, default=None)
    check.add_argument("--window", type=positive_int, default=50, help="Final steps averaged for the denoise loss")
    check.set_defaults(handler=cmd_check)
    return parser


def _configure_logging(level: str | None) -> None:
    settings = get_settings()
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format=settings.log_format,
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    _configure_logging(args.log_level)
    logger = logging.getLogger("cli")
    settings = get_settings()
    configure_determinism(settings.deterministic)
    if settings.num_threads > 0:
        torch.set_num_threads(settings.num_threads)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except ConfigurationError as e:
        logger.error(f"{args.command}: invalid configuration: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
