"""`calibrate` and `oracle-check`: the frequency-domain kernel against the master equation."""

from __future__ import annotations

import argparse
import asyncio
import logging
from dataclasses import asdict, fields

import numpy as np

from commands._common import CommandContext, common_parser
from services.emitter_scattering import ScatterKernel, scatter_one_photon
from services.kernel_store import KernelRecord
from services.oracle import (
    OracleOptions,
    calibrate_bound_constant,
    equivalence_point,
    oracle_scatter_one_photon,
)
from services.pulse_domain import EmitterParams, gaussian_one_photon
from services.results import format_value, table_csv
from services.run_config import RunConfigKey
from utils.config import Settings

logger = logging.getLogger(__name__)

TWO_PHOTON_TOLERANCE = 2e-2
ONE_PHOTON_TOLERANCE = 1e-3

ORACLE_CHECK_COLUMNS = (
    "sigma_k",
    "delta",
    "distance",
    "linear_distance",
    "oracle_norm",
    "schmidt_number",
    "passed",
)


def _text_block(record: dict) -> str:
    return "".join(f"{key} = {format_value(value)}\n" for key, value in record.items())


async def handle_calibrate(args: argparse.Namespace, settings: Settings) -> int:
    context = CommandContext.from_args(args, settings)
    config = context.config
    result = await asyncio.to_thread(
        calibrate_bound_constant,
        config.pulse().sigma_k,
        config.emitter(),
        config.shell(),
        config.oracle_options(),
        check_convergence=args.check_convergence,
    )
    record = KernelRecord.from_calibration(result)
    path = config.get(RunConfigKey.RUN_KERNEL_FILE)
    record.save(path)
    logger.info("Saved %s-shell calibration to %s", record.shell, path)
    summary = asdict(record)
    if context.text_output:
        context.emit(_text_block(summary))
    else:
        context.emit(table_csv([summary], [field.name for field in fields(KernelRecord)]))
    return 0


def check_point(
    sigma_k: float, emitter: EmitterParams, kernel: ScatterKernel, options: OracleOptions
) -> dict:
    """One (sigma_k, delta) entry of the equivalence table."""
    point = equivalence_point(sigma_k, emitter, kernel, options)
    phi = gaussian_one_photon(options.grid(), sigma_k)
    reference = oracle_scatter_one_photon(phi, emitter, options)
    exact = scatter_one_photon(phi, kernel.with_emitter(emitter))
    linear_distance = float(np.sqrt(np.sum(np.abs(exact.amps - reference.amps) ** 2) * phi.grid.dk))
    passed = point.distance <= TWO_PHOTON_TOLERANCE and linear_distance <= ONE_PHOTON_TOLERANCE
    logger.info(
        "oracle check sigma_k=%g delta=%g: two-photon %.3e one-photon %.3e",
        sigma_k,
        emitter.delta,
        point.distance,
        linear_distance,
    )
    return {
        "sigma_k": sigma_k,
        "delta": emitter.delta,
        "distance": point.distance,
        "linear_distance": linear_distance,
        "oracle_norm": point.oracle_norm,
        "schmidt_number": point.schmidt_number,
        "passed": passed,
    }


async def handle_oracle_check(args: argparse.Namespace, settings: Settings) -> int:
    context = CommandContext.from_args(args, settings)
    config = context.config
    kernel = context.kernel()
    options = config.oracle_options()
    gamma = config.emitter().gamma
    semaphore = asyncio.Semaphore(settings.threads)

    async def run(sigma_k: float, delta: float) -> dict:
        async with semaphore:
            emitter = EmitterParams(gamma, delta)
            return await asyncio.to_thread(check_point, sigma_k, emitter, kernel, options)

    records = await asyncio.gather(
        *(
            run(sigma_k, delta)
            for sigma_k in config.get(RunConfigKey.ORACLE_SIGMA_VALUES)
            for delta in config.get(RunConfigKey.ORACLE_DELTA_VALUES)
        )
    )
    if context.text_output:
        context.emit("\n".join(_text_block(record) for record in records))
    else:
        rows = [{**record, "passed": "true" if record["passed"] else "false"} for record in records]
        context.emit(table_csv(rows, ORACLE_CHECK_COLUMNS))
    failed = sum(not record["passed"] for record in records)
    if failed:
        logger.error("%d of %d oracle points outside tolerance", failed, len(records))
        return 1
    return 0


def setup(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "calibrate",
        parents=[common_parser()],
        help="fit the correlated-term constant against the master-equation oracle",
    )
    parser.add_argument(
        "--check-convergence",
        action="store_true",
        help="always repeat the fit on a lattice twice as fine and record the change",
    )
    parser.set_defaults(handler=handle_calibrate)

    parser = subparsers.add_parser(
        "oracle-check",
        parents=[common_parser()],
        help="compare the calibrated kernel with the oracle on the sigma_k x delta grid",
    )
    parser.set_defaults(handler=handle_oracle_check)
