# main.py - The Unified Entry Point for REMIX
import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from core.config import load_config
from core.errors import ConfigurationError, RemixError, RemixValidationError
from core.logging_setup import configure_logging

logger = logging.getLogger("REMIX")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

PIPELINE_COMMANDS = {
    "analyze": "Context-audio feature analysis: condition profiles and Bonferroni-corrected t-tests.",
    "prepare": "Ingest, filter and split the listening events into folds.",
    "train": "Build preference models and initial top-N lists for every prepared fold.",
    "rerank": "Re-rank an external list file with a saved preference model.",
    "evaluate": "λ-sweep re-ranking and Prec@k / MAP@k reports over the trained folds.",
    "pipeline": "Run prepare, train and evaluate (and analyze when configured) end to end.",
}


class RemixArgumentParser(argparse.ArgumentParser):
    """أخطاء الاستخدام تُعامل كأخطاء تحقق (رمز الخروج 1)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def setup_arg_parser() -> argparse.ArgumentParser:
    """إعداد محلل وسيطات سطر الأوامر."""
    common = RemixArgumentParser(add_help=False)
    common.add_argument("--config", type=str, required=True, help="Path to the JSON pipeline configuration.")
    common.add_argument("--seed", type=int, default=None, help="Override the configured RNG seed.")
    common.add_argument("--output", type=str, default=None, help="Override the configured output directory.")
    common.add_argument("--jobs", type=int, default=None, help="Worker threads for per-fold work (env: REMIX_JOBS).")
    common.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING... (env: REMIX_LOG_LEVEL).")

    parser = RemixArgumentParser(description="REMIX: context-aware re-ranking of music recommendations")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=RemixArgumentParser)
    for name, help_text in PIPELINE_COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)

    synth = subparsers.add_parser("synthesize", help="Write the synthetic directional fixture and its config.")
    synth.add_argument("--output", type=str, required=True, help="Directory for catalog, events, playlists and config.")
    synth.add_argument("--seed", type=int, default=7, help="Fixture generator seed.")
    synth.add_argument("--log-level", type=str, default=None)
    return parser


def _resolve_jobs(cli_jobs: Optional[int]) -> Optional[int]:
    if cli_jobs is not None:
        return cli_jobs
    raw = os.getenv("REMIX_JOBS")
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"REMIX_JOBS must be an integer, got {raw!r}") from None


async def run_command(args: argparse.Namespace) -> int:
    if args.command == "synthesize":
        from tools.synthetic_data import FixtureSpec, write_directional_fixture

        path = write_directional_fixture(args.output, FixtureSpec(seed=args.seed))
        print(f"Synthetic fixture written; run: python main.py pipeline --config {path}")
        return EXIT_OK

    from core.core_orchestrator import core_orchestrator

    config = load_config(args.config, seed=args.seed, output=args.output, jobs=_resolve_jobs(args.jobs))
    state = await core_orchestrator.run_workflow(args.command, config)
    for entry in state["stages"]:
        print(f"[{entry['stage']}] {entry['status']}: {entry.get('summary', '')}")
    print(f"Outputs in {config.output_dir}")
    return EXIT_OK


async def main(argv: Optional[List[str]] = None) -> int:
    """نقطة الدخول الرئيسية للنظام."""
    parser = setup_arg_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return await run_command(args)
    except (RemixValidationError, ValidationError) as e:
        logger.error(f"❌ Invalid input: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RemixError as e:
        logger.error(f"❌ Run failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"❌ Unexpected failure: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        print("\nWorkflow execution interrupted by user.")
        sys.exit(EXIT_RUNTIME)
