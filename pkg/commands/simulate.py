"""`simulate`: one cascade at explicit parameters."""

from __future__ import annotations

import argparse
import asyncio
import logging

from commands._common import CommandContext, common_parser
from services.cascade import SorterLayout, evaluate
from services.results import ScanResult, ScanRow, metrics_text
from services.run_config import RunConfigKey
from utils.config import Settings

logger = logging.getLogger(__name__)


async def handle_simulate(args: argparse.Namespace, settings: Settings) -> int:
    context = CommandContext.from_args(args, settings)
    config = context.config
    cascade = config.cascade_config(context.kernel())
    layout = SorterLayout(config.get(RunConfigKey.OPTIMIZER_SORTER_LAYOUT))
    metrics = await asyncio.to_thread(evaluate, cascade, layout)
    logger.info(
        "simulate N=%d: F=%.9f P_fail=%.9f drift=%.2e",
        metrics.n_rounds,
        metrics.fidelity,
        metrics.p_fail,
        metrics.norm_drift,
    )
    if context.text_output:
        context.emit(metrics_text(metrics))
        return 0
    trap = cascade.trap
    row = ScanRow.from_metrics(
        metrics,
        sigma_k=cascade.pulse.sigma_k,
        delta=cascade.emitter.delta,
        lambda1=None if trap is None else trap.lambda1,
        lambda2=None if trap is None else trap.lambda2,
        grid_m=cascade.grid.m,
    )
    context.emit(ScanResult([row]).to_csv())
    return 0


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "simulate",
        parents=[common_parser()],
        help="run one cascade and report overlap, fidelity and sorter probabilities",
    )
    parser.set_defaults(handler=handle_simulate)
