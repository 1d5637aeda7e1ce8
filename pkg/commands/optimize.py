"""`optimize` (one N) and `scan` (every configured N and trap mode)."""

from __future__ import annotations

import argparse
import logging

from commands._common import CommandContext, common_parser
from services.optimizer import optimize_for_n, scan
from services.results import ScanResult
from services.run_config import RunConfigKey
from utils.config import Settings

logger = logging.getLogger(__name__)


def _render(context: CommandContext, result: ScanResult) -> str:
    return result.to_text() if context.text_output else result.to_csv()


async def handle_optimize(args: argparse.Namespace, settings: Settings) -> int:
    context = CommandContext.from_args(args, settings)
    config = context.config
    n = config.get(RunConfigKey.RUN_N_ROUNDS)
    if n < 1:
        raise ValueError(f"run.n_rounds={n} must be at least 1")
    spec = config.optimization_spec(settings.threads)
    trap = config.get(RunConfigKey.TRAP_ENABLED)
    row = await optimize_for_n(n, spec, context.kernel(), trap)
    context.emit(_render(context, ScanResult([row])))
    return 0


async def handle_scan(args: argparse.Namespace, settings: Settings) -> int:
    context = CommandContext.from_args(args, settings)
    config = context.config
    # On a scan the single-run flags narrow the sweep instead.
    if args.n is not None:
        config.set(RunConfigKey.OPTIMIZER_N_VALUES, (args.n,))
    if args.trap is not None:
        config.set(RunConfigKey.OPTIMIZER_TRAP_MODES, (args.trap,))
    spec = config.optimization_spec(settings.threads)
    logger.info(
        "Scanning N=%s trap modes=%s with %d worker(s)",
        list(spec.n_values),
        ["on" if mode else "off" for mode in spec.trap_modes],
        spec.threads,
    )
    result = await scan(spec, context.kernel())
    context.emit(_render(context, result))
    expected = len(spec.n_values) * len(spec.trap_modes)
    if len(result.rows) < expected:
        logger.error("%d of %d scan rows failed", expected - len(result.rows), expected)
        return 1
    return 0


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "optimize",
        parents=[common_parser()],
        help="optimise pulse and trap parameters for run.n_rounds",
    )
    parser.set_defaults(handler=handle_optimize)

    parser = subparsers.add_parser(
        "scan",
        parents=[common_parser()],
        help="optimise every N in optimizer.n_values for each trap mode",
    )
    parser.set_defaults(handler=handle_scan)
