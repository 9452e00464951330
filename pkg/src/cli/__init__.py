"""Command-line entry point: gen-data, train, sample, eval, check."""

from src.cli.app import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main

__all__ = ["EXIT_OK", "EXIT_RUNTIME", "EXIT_USAGE", "build_parser", "main"]
