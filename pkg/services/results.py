"""Scan rows, their tabular form and the writer that puts them on disk."""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

import pandas as pd

from services.cascade import MetricsReport
from utils.text import FLOAT_FORMAT, format_complex, format_float

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "n",
    "trap",
    "sigma_k",
    "delta",
    "lambda1",
    "lambda2",
    "fidelity",
    "infidelity",
    "p_success",
    "p_fail",
    "evals",
    "converged",
    "grid_m",
)
FLOAT_COLUMNS = (
    "sigma_k",
    "delta",
    "lambda1",
    "lambda2",
    "fidelity",
    "infidelity",
    "p_success",
    "p_fail",
)


@dataclass(frozen=True)
class ScanRow:
    """One optimised (or directly simulated) parameter point and its metrics."""

    n: int
    trap: bool
    sigma_k: float
    delta: float
    lambda1: Optional[float]
    lambda2: Optional[float]
    fidelity: float
    infidelity: float
    p_success: float
    p_fail: float
    evals: int
    converged: bool
    grid_m: int

    @classmethod
    def from_metrics(
        cls,
        metrics: MetricsReport,
        *,
        sigma_k: float,
        delta: float,
        lambda1: Optional[float],
        lambda2: Optional[float],
        grid_m: int,
        evals: int = 1,
        converged: bool = True,
    ) -> ScanRow:
        return cls(
            n=metrics.n_rounds,
            trap=lambda1 is not None,
            sigma_k=sigma_k,
            delta=delta,
            lambda1=lambda1,
            lambda2=lambda2,
            fidelity=metrics.fidelity,
            infidelity=1.0 - metrics.fidelity,
            p_success=metrics.p_success,
            p_fail=metrics.p_fail,
            evals=evals,
            converged=converged,
            grid_m=grid_m,
        )

    @classmethod
    def unevaluated(
        cls, n: int, params: tuple[float, ...], trap: bool, grid_m: int, evals: int
    ) -> ScanRow:
        """Row for a point no cascade could be run at; metrics are NaN, converged=false."""
        nan = float("nan")
        return cls(
            n=n,
            trap=trap,
            sigma_k=params[0],
            delta=params[1],
            lambda1=params[2] if trap else None,
            lambda2=params[3] if trap else None,
            fidelity=nan,
            infidelity=nan,
            p_success=nan,
            p_fail=nan,
            evals=evals,
            converged=False,
            grid_m=grid_m,
        )

    @property
    def parameters(self) -> tuple[float, ...]:
        """Optimiser coordinates: (sigma_k, delta[, lambda1, lambda2])."""
        if self.trap and self.lambda1 is not None and self.lambda2 is not None:
            return (self.sigma_k, self.delta, self.lambda1, self.lambda2)
        return (self.sigma_k, self.delta)

    def as_record(self) -> dict:
        nan = float("nan")
        return {
            "n": self.n,
            "trap": "on" if self.trap else "off",
            "sigma_k": self.sigma_k,
            "delta": self.delta,
            "lambda1": nan if self.lambda1 is None else self.lambda1,
            "lambda2": nan if self.lambda2 is None else self.lambda2,
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "p_success": self.p_success,
            "p_fail": self.p_fail,
            "evals": self.evals,
            "converged": "true" if self.converged else "false",
            "grid_m": self.grid_m,
        }


@dataclass
class ScanResult:
    rows: list[ScanRow] = field(default_factory=list)

    def add(self, row: ScanRow) -> None:
        self.rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.as_record() for row in self.rows], columns=list(CSV_COLUMNS))
        for column in FLOAT_COLUMNS:
            frame[column] = frame[column].astype("float64")
        return frame

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.to_frame().to_csv(
            buffer, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n"
        )
        return buffer.getvalue()

    def to_text(self) -> str:
        blocks = []
        for row in self.rows:
            record = row.as_record()
            lines = [f"[n={row.n} trap={record['trap']}]"]
            for column in CSV_COLUMNS[2:]:
                value = getattr(row, column)
                if value is None:
                    continue
                lines.append(f"{column} = {format_value(value)}")
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + ("\n" if blocks else "")


def format_value(value: object) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return format_complex(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def metrics_text(metrics: MetricsReport) -> str:
    """Structured-text rendering of a single cascade evaluation."""
    lines = [
        f"n_rounds = {metrics.n_rounds}",
        f"overlap = {format_complex(metrics.overlap)}",
        f"fidelity = {format_float(metrics.fidelity)}",
        f"infidelity = {format_float(1.0 - metrics.fidelity)}",
        f"p_success = {format_float(metrics.p_success)}",
        f"p_fail = {format_float(metrics.p_fail)}",
        f"norm_drift = {format_float(metrics.norm_drift)}",
        f"linear_phase = {format_float(metrics.linear_phase)}",
        f"phase_difference = {format_float(metrics.phase_difference)}",
    ]
    lines.extend(
        f"round.{index} = {format_complex(value)}"
        for index, value in enumerate(metrics.per_round_overlaps, start=1)
    )
    return "\n".join(lines) + "\n"


def table_csv(records: Iterable[dict], columns: Iterable[str]) -> str:
    buffer = io.StringIO()
    pd.DataFrame(list(records), columns=list(columns)).to_csv(
        buffer, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n"
    )
    return buffer.getvalue()


class ResultWriter:
    """Writes rendered results below `base_dir`, creating directories as needed."""

    def __init__(self, base_dir: str = "."):
        self.base_dir = base_dir

    def write(self, content: str, path: str) -> str:
        target = path if os.path.isabs(path) else os.path.join(self.base_dir, path)
        directory = os.path.dirname(target)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        logger.info("Wrote %s", target)
        return target
