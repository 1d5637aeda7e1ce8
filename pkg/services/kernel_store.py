# services/kernel_store.py
import json
import logging
from dataclasses import asdict, dataclass
from typing import Optional

from services.emitter_scattering import EnergyShell, ScatterKernel
from services.errors import CalibrationError
from services.oracle import CalibrationResult
from services.pulse_domain import EmitterParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelRecord:
    """Calibrated correlated-term constant with the conditions it was fitted under."""

    shell: str
    constant_re: float
    constant_im: float
    residual: Optional[float]
    gamma: float
    delta: float
    sigma_k: float
    grid_m: int
    k_max: float
    grid_delta: Optional[float] = None

    @classmethod
    def from_calibration(cls, result: CalibrationResult) -> "KernelRecord":
        return cls(
            shell=result.shell.value,
            constant_re=result.constant.real,
            constant_im=result.constant.imag,
            residual=result.residual,
            gamma=result.emitter.gamma,
            delta=result.emitter.delta,
            sigma_k=result.sigma_k,
            grid_m=result.grid.m,
            k_max=result.grid.k_max,
            grid_delta=result.grid_delta,
        )

    @property
    def constant(self) -> complex:
        return complex(self.constant_re, self.constant_im)

    def to_kernel(self, emitter: EmitterParams) -> ScatterKernel:
        """Kernel at `emitter`; only the decay rate has to match the calibration."""
        if abs(emitter.gamma - self.gamma) > 1e-12 * self.gamma:
            raise CalibrationError(
                f"kernel was calibrated for gamma={self.gamma}, run uses gamma={emitter.gamma}"
            )
        return ScatterKernel(emitter, self.constant, EnergyShell(self.shell), True, self.residual)

    def save(self, path: str = "kernel.json") -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, ensure_ascii=False)
            f.write("\n")

    @classmethod
    def load(cls, path: str = "kernel.json") -> "KernelRecord":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise CalibrationError(
                f"no kernel calibration at {path}; "
                "run `calibrate` first or set run.uncalibrated = true"
            ) from None
        try:
            return cls(**data)
        except TypeError as exc:
            raise CalibrationError(f"malformed kernel file {path}: {exc}") from exc


def resolve_kernel(
    emitter: EmitterParams, shell: EnergyShell, kernel_file: str, uncalibrated: bool
) -> ScatterKernel:
    """Kernel for a nonlinear run: the stored calibration, or the analytic constant on request."""
    if uncalibrated:
        logger.info("Using the analytic %s-shell constant (uncalibrated run)", shell.value)
        return ScatterKernel.analytic(emitter, shell)
    record = KernelRecord.load(kernel_file)
    if record.shell != shell.value:
        raise CalibrationError(
            f"{kernel_file} holds a {record.shell}-shell calibration but run.shell is {shell.value}"
        )
    logger.info("Loaded kernel %s: C=%s residual=%s", kernel_file, record.constant, record.residual)
    return record.to_kernel(emitter)
