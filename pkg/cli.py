"""Photon-gate simulator entrypoint.

Configures logging, loads process settings, discovers the command modules in
./commands and dispatches to the selected command's async handler.
"""

from __future__ import annotations

import argparse
import asyncio
import importlib
import logging
import os
import sys
from typing import Optional, Sequence

from services.errors import PhotonGateError
from utils.config import Settings, get_settings

logger = logging.getLogger(__name__)

COMMANDS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "commands")


def configure_logging(settings: Settings) -> None:
    os.makedirs(settings.log_dir, exist_ok=True)
    log_file = os.path.join(settings.log_dir, "photon_gate.log")
    logging.basicConfig(
        level=settings.log_level_value,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=[
            logging.FileHandler(log_file, encoding="utf-8"),
            logging.StreamHandler(sys.stderr),
        ],
    )


def load_commands(subparsers: argparse._SubParsersAction) -> list[str]:
    """Register every command module found in the commands directory."""
    loaded = []
    for filename in sorted(os.listdir(COMMANDS_DIR)):
        if not filename.endswith(".py") or filename.startswith("_"):
            continue
        module_name = f"commands.{filename[:-3]}"
        try:
            module = importlib.import_module(module_name)
            module.setup(subparsers)
            loaded.append(module_name)
        except Exception as exc:
            logger.exception("Failed to load command module %s: %s", module_name, exc)
    return loaded


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-gate",
        description="Cascaded two-level-emitter photon gate simulator",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    load_commands(subparsers)
    return parser


def _fail(message: object, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        settings = get_settings()
    except ValueError as exc:
        return _fail(exc, 2)
    configure_logging(settings)
    logger.debug("Running %s with %d worker thread(s)", args.command, settings.threads)

    try:
        return asyncio.run(args.handler(args, settings))
    except PhotonGateError as exc:
        return _fail(exc, 1)
    except KeyError as exc:
        return _fail(exc.args[0] if exc.args else exc, 2)
    except (ValueError, OSError) as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(run_cli())
