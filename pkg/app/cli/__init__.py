import argparse
import logging
from typing import List, Optional

from app.cli.commands import build_kg, evaluate, explain, predict, synth, train
from app.core.config import settings
from app.core.errors import ConfigError, RoadKGError

logger = logging.getLogger(__name__)

# Subcommands in the order of the pipeline
COMMANDS = {
    "build-kg": build_kg,
    "train": train,
    "predict": predict,
    "evaluate": evaluate,
    "synth": synth,
    "explain": explain,
}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadkg",
        description="Road-user behavior prediction with knowledge graph embeddings and Bayesian inference",
    )
    parser.add_argument("--version", action="version", version=f"{settings.PROJECT_NAME} {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for name, module in COMMANDS.items():
        module.register(subparsers.add_parser(name, help=module.HELP, description=module.HELP))
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return EXIT_OK if not e.code else EXIT_USAGE

    try:
        return args.handler(args)
    except (ConfigError, FileNotFoundError) as e:
        logger.error(f"🔥 {args.command}: {e}")
        return EXIT_USAGE
    except RoadKGError as e:
        logger.error(f"🔥 {args.command} failed: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"🔥 {args.command} failed unexpectedly: {e}")
        return EXIT_FAILURE
