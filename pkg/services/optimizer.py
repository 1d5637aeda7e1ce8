"""Bounded Nelder-Mead search over pulse and trap parameters, per N and as scans.

Restarts of one N run concurrently in worker threads; results are reduced in
restart order so the outcome only depends on the seed.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from services.cascade import (
    CascadeConfig,
    CompensationFlags,
    InputPulse,
    MetricsReport,
    SorterLayout,
    evaluate,
)
from services.emitter_scattering import ScatterKernel
from services.errors import PhotonGateError
from services.pulse_domain import COVERAGE_SIGMAS, EmitterParams, SpectralGrid, make_grid
from services.results import ScanResult, ScanRow
from services.temporal_trap import TrapParams

logger = logging.getLogger(__name__)

PENALTY = 1.0
VERIFY_TOLERANCE = 1e-3


class Objective(str, Enum):
    CZ_INFIDELITY = "cz_infidelity"
    SORTER_PFAIL = "sorter_pfail"

    def score(self, metrics: MetricsReport) -> float:
        if self is Objective.CZ_INFIDELITY:
            return 1.0 - metrics.fidelity
        return metrics.p_fail


@dataclass(frozen=True)
class Bounds:
    sigma_k: tuple[float, float] = (0.05, 5.0)
    delta: tuple[float, float] = (0.1, 50.0)
    lambda1: tuple[float, float] = (-5.0, 5.0)
    lambda2: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self) -> None:
        for name in ("sigma_k", "delta", "lambda1", "lambda2"):
            low, high = getattr(self, name)
            if not low < high:
                raise ValueError(f"{name} bounds [{low}, {high}] are empty")
        if self.sigma_k[0] <= 0:
            raise ValueError("sigma_k bounds must stay positive")

    def box(self, trap: bool) -> list[tuple[float, float]]:
        box = [self.sigma_k, self.delta]
        return box + [self.lambda1, self.lambda2] if trap else box


@dataclass(frozen=True)
class OptimizationSpec:
    n_values: tuple[int, ...] = tuple(range(1, 18, 2))
    trap_modes: tuple[bool, ...] = (True, False)
    objective: Objective = Objective.CZ_INFIDELITY
    bounds: Bounds = field(default_factory=Bounds)
    restarts: int = 4
    seed: int = 0
    fatol: float = 1e-6
    xatol: float = 1e-6
    max_evals: int = 400
    grid: SpectralGrid = field(default_factory=lambda: make_grid(1024, 16.0))
    compensation: CompensationFlags = field(default_factory=CompensationFlags)
    k0: float = 0.0
    sorter_layout: SorterLayout = SorterLayout.CASCADE
    verify_grid: bool = False
    start: Optional[tuple[float, ...]] = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError(f"restarts={self.restarts} must be at least 1")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ValueError(f"n_values {self.n_values} must be positive round counts")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        self.search_box(trap=False)

    def search_box(self, trap: bool) -> list[tuple[float, float]]:
        """Bounds box with sigma_k capped so the input Gaussian fits the momentum window."""
        box = self.bounds.box(trap)
        low, high = box[0]
        high = min(high, (self.grid.k_max - abs(self.k0)) / COVERAGE_SIGMAS)
        if not low < high:
            raise ValueError(
                f"no sigma_k in [{low}, {box[0][1]}] fits {COVERAGE_SIGMAS:g} widths "
                f"into k_max={self.grid.k_max} around k0={self.k0}"
            )
        return [(low, high)] + box[1:]


@dataclass(frozen=True)
class RestartOutcome:
    index: int
    x: np.ndarray
    value: float
    evals: int
    converged: bool


def build_config(
    n: int, params: Sequence[float], trap: bool, spec: OptimizationSpec, kernel: ScatterKernel
) -> CascadeConfig:
    emitter = EmitterParams(kernel.emitter.gamma, float(params[1]))
    return CascadeConfig(
        n_rounds=n,
        grid=spec.grid,
        kernel=kernel.with_emitter(emitter),
        trap=TrapParams.symmetric(params[2], params[3]) if trap else None,
        compensation=spec.compensation,
        pulse=InputPulse(float(params[0]), spec.k0),
    )


def objective_value(
    n: int, params: Sequence[float], trap: bool, spec: OptimizationSpec, kernel: ScatterKernel
) -> float:
    try:
        metrics = evaluate(build_config(n, params, trap, spec, kernel), spec.sorter_layout)
    except PhotonGateError as exc:
        logger.debug("penalised point %s: %s", np.round(params, 6), exc)
        return PENALTY
    return spec.objective.score(metrics)


def start_points(
    n: int, trap: bool, spec: OptimizationSpec, warm_start: Optional[Sequence[float]] = None
) -> list[np.ndarray]:
    """Configured point, warm start, box centre, then seeded uniform draws; all clipped."""
    box = np.array(spec.search_box(trap))
    low, high = box[:, 0], box[:, 1]
    dimension = len(box)
    points = []
    for candidate in (spec.start, warm_start):
        if candidate is not None and len(candidate) >= dimension:
            points.append(np.asarray(candidate[:dimension], dtype=np.float64))
    points.append(0.5 * (low + high))
    rng = np.random.default_rng([spec.seed, n, int(trap)])
    points.extend(rng.uniform(low, high) for _ in range(spec.restarts))
    return [np.clip(point, low, high) for point in points]


def _run_restart(
    index: int, x0: np.ndarray, n: int, trap: bool, spec: OptimizationSpec, kernel: ScatterKernel
) -> RestartOutcome:
    result = minimize(
        lambda x: objective_value(n, x, trap, spec, kernel),
        x0,
        method="Nelder-Mead",
        bounds=spec.search_box(trap),
        options={"xatol": spec.xatol, "fatol": spec.fatol, "maxfev": spec.max_evals},
    )
    logger.debug("restart %d for N=%d: f=%.6e after %d evals", index, n, result.fun, result.nfev)
    return RestartOutcome(
        index, np.asarray(result.x), float(result.fun), int(result.nfev), bool(result.success)
    )


def certify(
    n: int,
    params: Sequence[float],
    trap: bool,
    spec: OptimizationSpec,
    kernel: ScatterKernel,
    evals: int = 1,
    converged: bool = True,
) -> ScanRow:
    """Re-evaluate a parameter point and turn it into a CSV row."""
    config = build_config(n, params, trap, spec, kernel)
    metrics = evaluate(config, spec.sorter_layout)
    return ScanRow.from_metrics(
        metrics,
        sigma_k=float(params[0]),
        delta=float(params[1]),
        lambda1=float(params[2]) if trap else None,
        lambda2=float(params[3]) if trap else None,
        grid_m=spec.grid.m,
        evals=evals,
        converged=converged,
    )


def _certify_or_flag(
    n: int,
    params: np.ndarray,
    trap: bool,
    spec: OptimizationSpec,
    kernel: ScatterKernel,
    best: RestartOutcome,
    total_evals: int,
) -> ScanRow:
    """Certified row, or a NaN row flagged converged=false when no restart left the penalty."""
    if best.value < PENALTY:
        try:
            return certify(n, params, trap, spec, kernel, total_evals, best.converged)
        except PhotonGateError as exc:
            logger.warning("N=%d trap=%s: best point cannot be certified: %s", n, trap, exc)
    else:
        logger.warning("N=%d trap=%s: every restart stayed penalised", n, trap)
    point = tuple(float(value) for value in params)
    return ScanRow.unevaluated(n, point, trap, spec.grid.m, total_evals)


def verify_on_finer_grid(row: ScanRow, spec: OptimizationSpec, kernel: ScatterKernel) -> float:
    """|Delta F| between the production lattice and one with twice the points."""
    finer = replace(spec, grid=spec.grid.refined())
    refined = certify(row.n, row.parameters, row.trap, finer, kernel)
    change = abs(refined.fidelity - row.fidelity)
    if change >= VERIFY_TOLERANCE:
        logger.warning(
            "N=%d trap=%s not grid-converged: |dF|=%.2e at m=%d",
            row.n,
            row.trap,
            change,
            finer.grid.m,
        )
    return change


async def optimize_for_n(
    n: int,
    spec: OptimizationSpec,
    kernel: ScatterKernel,
    trap: bool = True,
    warm_start: Optional[Sequence[float]] = None,
    semaphore: Optional[asyncio.Semaphore] = None,
) -> ScanRow:
    """Best row for one N over all restarts.

    Restarts run in worker threads bounded by `semaphore`. Ties between
    restarts go to the lower restart index. A row whose best restart ran out
    of evaluations is still returned, flagged converged=false; so is a row
    whose best point stayed penalised, with NaN metrics.
    """
    semaphore = semaphore or asyncio.Semaphore(spec.threads)
    starts = start_points(n, trap, spec, warm_start)

    async def run(index: int, x0: np.ndarray) -> RestartOutcome:
        async with semaphore:
            return await asyncio.to_thread(_run_restart, index, x0, n, trap, spec, kernel)

    outcomes = await asyncio.gather(*(run(index, x0) for index, x0 in enumerate(starts)))
    best = min(outcomes, key=lambda outcome: (outcome.value, outcome.index))
    box = np.array(spec.search_box(trap))
    params = np.clip(best.x, box[:, 0], box[:, 1])
    total_evals = sum(outcome.evals for outcome in outcomes)
    row = await asyncio.to_thread(
        _certify_or_flag, n, params, trap, spec, kernel, best, total_evals
    )
    logger.info(
        "N=%d trap=%s: F=%.6f P_fail=%.6f sigma_k=%.4f delta=%.4f (%d evals)",
        n,
        "on" if trap else "off",
        row.fidelity,
        row.p_fail,
        row.sigma_k,
        row.delta,
        total_evals,
    )
    if spec.verify_grid and np.isfinite(row.fidelity):
        await asyncio.to_thread(verify_on_finer_grid, row, spec, kernel)
    return row


async def scan(spec: OptimizationSpec, kernel: ScatterKernel) -> ScanResult:
    """Rows for every requested (trap mode, N); each N warm-starts from the previous optimum."""
    result = ScanResult()
    semaphore = asyncio.Semaphore(spec.threads)
    for trap in spec.trap_modes:
        warm: Optional[tuple[float, ...]] = None
        for n in spec.n_values:
            try:
                row = await optimize_for_n(n, spec, kernel, trap, warm, semaphore)
            except Exception as exc:
                logger.exception("Scan row N=%d trap=%s failed: %s", n, trap, exc)
                continue
            result.add(row)
            warm = row.parameters
    return result
