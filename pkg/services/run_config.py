# services/run_config.py
"""Flat key/value run configuration with dotted section names.

Files are UTF-8 `key = value` lines with `#` comments. Values are parsed
according to the key's type; unknown keys raise KeyError.
"""

import logging
from copy import deepcopy
from enum import Enum
from typing import Any, Callable, Iterable, Optional

from services.cascade import CascadeConfig, CompensationFlags, InputPulse, SorterLayout
from services.emitter_scattering import EnergyShell, ScatterKernel
from services.oracle import OracleOptions
from services.optimizer import Bounds, Objective, OptimizationSpec
from services.pulse_domain import EmitterParams, SpectralGrid, make_grid
from services.temporal_trap import TrapParams, trap_from_rotation
from utils.text import (
    format_float,
    parse_bool,
    parse_key_value,
    parse_optional_float,
    split_list,
)

logger = logging.getLogger(__name__)


class RunConfigKey(Enum):
    GRID_M = "grid.m"
    GRID_K_MAX = "grid.k_max"
    EMITTER_GAMMA = "emitter.gamma"
    EMITTER_DELTA = "emitter.delta"
    INPUT_SIGMA_K = "input.sigma_k"
    INPUT_K0 = "input.k0"
    TRAP_ENABLED = "trap.enabled"
    TRAP_LAMBDA1 = "trap.lambda1"
    TRAP_LAMBDA2 = "trap.lambda2"
    TRAP_LAMBDA3 = "trap.lambda3"
    TRAP_OMEGA_DT = "trap.omega_dt"
    TRAP_SIGMA_T = "trap.sigma_t"
    RUN_N_ROUNDS = "run.n_rounds"
    RUN_DELAY_COMPENSATION = "run.delay_compensation"
    RUN_SECOND_ORDER_COMPENSATION = "run.second_order_compensation"
    RUN_KERNEL_FILE = "run.kernel_file"
    RUN_UNCALIBRATED = "run.uncalibrated"
    RUN_SHELL = "run.shell"
    OPTIMIZER_N_VALUES = "optimizer.n_values"
    OPTIMIZER_TRAP_MODES = "optimizer.trap_modes"
    OPTIMIZER_OBJECTIVE = "optimizer.objective"
    OPTIMIZER_RESTARTS = "optimizer.restarts"
    OPTIMIZER_SEED = "optimizer.seed"
    OPTIMIZER_FATOL = "optimizer.fatol"
    OPTIMIZER_XATOL = "optimizer.xatol"
    OPTIMIZER_MAX_EVALS = "optimizer.max_evals"
    OPTIMIZER_SIGMA_K_BOUNDS = "optimizer.sigma_k_bounds"
    OPTIMIZER_DELTA_BOUNDS = "optimizer.delta_bounds"
    OPTIMIZER_LAMBDA1_BOUNDS = "optimizer.lambda1_bounds"
    OPTIMIZER_LAMBDA2_BOUNDS = "optimizer.lambda2_bounds"
    OPTIMIZER_VERIFY_GRID = "optimizer.verify_grid"
    OPTIMIZER_SORTER_LAYOUT = "optimizer.sorter_layout"
    ORACLE_M = "oracle.m"
    ORACLE_K_MAX = "oracle.k_max"
    ORACLE_MAX_STEP = "oracle.max_step"
    ORACLE_TRUNCATION = "oracle.truncation"
    ORACLE_EPSILON = "oracle.epsilon"
    ORACLE_SIGMA_VALUES = "oracle.sigma_values"
    ORACLE_DELTA_VALUES = "oracle.delta_values"


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(item) for item in split_list(text))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in split_list(text))


def _pair(text: str) -> tuple[float, float]:
    values = _float_list(text)
    if len(values) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return values[0], values[1]


def _trap_modes(text: str) -> tuple[bool, ...]:
    return tuple(parse_bool(item) for item in split_list(text))


def _choice(enum: type[Enum]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        return enum(text.strip()).value

    return parse


def _text(text: str) -> str:
    return text.strip()


K = RunConfigKey


class RunConfig:
    DEFAULTS: dict[str, Any] = {
        K.GRID_M.value: 1024,
        K.GRID_K_MAX.value: 16.0,
        K.EMITTER_GAMMA.value: 1.0,
        K.EMITTER_DELTA.value: 2.0,
        K.INPUT_SIGMA_K.value: 1.0,
        K.INPUT_K0.value: 0.0,
        K.TRAP_ENABLED.value: True,
        K.TRAP_LAMBDA1.value: 0.25,
        K.TRAP_LAMBDA2.value: 0.4,
        K.TRAP_LAMBDA3.value: None,
        K.TRAP_OMEGA_DT.value: None,
        K.TRAP_SIGMA_T.value: None,
        K.RUN_N_ROUNDS.value: 17,
        K.RUN_DELAY_COMPENSATION.value: True,
        K.RUN_SECOND_ORDER_COMPENSATION.value: True,
        K.RUN_KERNEL_FILE.value: "kernel.json",
        K.RUN_UNCALIBRATED.value: False,
        K.RUN_SHELL.value: EnergyShell.POLE.value,
        K.OPTIMIZER_N_VALUES.value: tuple(range(1, 18, 2)),
        K.OPTIMIZER_TRAP_MODES.value: (True, False),
        K.OPTIMIZER_OBJECTIVE.value: Objective.CZ_INFIDELITY.value,
        K.OPTIMIZER_RESTARTS.value: 4,
        K.OPTIMIZER_SEED.value: 0,
        K.OPTIMIZER_FATOL.value: 1e-6,
        K.OPTIMIZER_XATOL.value: 1e-6,
        K.OPTIMIZER_MAX_EVALS.value: 400,
        K.OPTIMIZER_SIGMA_K_BOUNDS.value: (0.05, 5.0),
        K.OPTIMIZER_DELTA_BOUNDS.value: (0.1, 50.0),
        K.OPTIMIZER_LAMBDA1_BOUNDS.value: (-5.0, 5.0),
        K.OPTIMIZER_LAMBDA2_BOUNDS.value: (-5.0, 5.0),
        K.OPTIMIZER_VERIFY_GRID.value: False,
        K.OPTIMIZER_SORTER_LAYOUT.value: SorterLayout.CASCADE.value,
        K.ORACLE_M.value: 256,
        K.ORACLE_K_MAX.value: 16.0,
        K.ORACLE_MAX_STEP.value: 0.01,
        K.ORACLE_TRUNCATION.value: 1e-6,
        K.ORACLE_EPSILON.value: 1e-8,
        K.ORACLE_SIGMA_VALUES.value: (0.5, 1.0, 2.0),
        K.ORACLE_DELTA_VALUES.value: (1.0, 2.0, 4.0),
    }

    PARSERS: dict[str, Callable[[str], Any]] = {
        K.GRID_M.value: int,
        K.GRID_K_MAX.value: float,
        K.EMITTER_GAMMA.value: float,
        K.EMITTER_DELTA.value: float,
        K.INPUT_SIGMA_K.value: float,
        K.INPUT_K0.value: float,
        K.TRAP_ENABLED.value: parse_bool,
        K.TRAP_LAMBDA1.value: float,
        K.TRAP_LAMBDA2.value: float,
        K.TRAP_LAMBDA3.value: parse_optional_float,
        K.TRAP_OMEGA_DT.value: parse_optional_float,
        K.TRAP_SIGMA_T.value: parse_optional_float,
        K.RUN_N_ROUNDS.value: int,
        K.RUN_DELAY_COMPENSATION.value: parse_bool,
        K.RUN_SECOND_ORDER_COMPENSATION.value: parse_bool,
        K.RUN_KERNEL_FILE.value: _text,
        K.RUN_UNCALIBRATED.value: parse_bool,
        K.RUN_SHELL.value: _choice(EnergyShell),
        K.OPTIMIZER_N_VALUES.value: _int_list,
        K.OPTIMIZER_TRAP_MODES.value: _trap_modes,
        K.OPTIMIZER_OBJECTIVE.value: _choice(Objective),
        K.OPTIMIZER_RESTARTS.value: int,
        K.OPTIMIZER_SEED.value: int,
        K.OPTIMIZER_FATOL.value: float,
        K.OPTIMIZER_XATOL.value: float,
        K.OPTIMIZER_MAX_EVALS.value: int,
        K.OPTIMIZER_SIGMA_K_BOUNDS.value: _pair,
        K.OPTIMIZER_DELTA_BOUNDS.value: _pair,
        K.OPTIMIZER_LAMBDA1_BOUNDS.value: _pair,
        K.OPTIMIZER_LAMBDA2_BOUNDS.value: _pair,
        K.OPTIMIZER_VERIFY_GRID.value: parse_bool,
        K.OPTIMIZER_SORTER_LAYOUT.value: _choice(SorterLayout),
        K.ORACLE_M.value: int,
        K.ORACLE_K_MAX.value: float,
        K.ORACLE_MAX_STEP.value: float,
        K.ORACLE_TRUNCATION.value: float,
        K.ORACLE_EPSILON.value: float,
        K.ORACLE_SIGMA_VALUES.value: _float_list,
        K.ORACLE_DELTA_VALUES.value: _float_list,
    }

    def __init__(self, config: Optional[dict] = None):
        self._config = deepcopy(self.DEFAULTS)
        if config:
            for key, value in config.items():
                self.set(key, value)

    def set(self, key, value):
        if isinstance(key, RunConfigKey):
            key = key.value
        if key not in self.DEFAULTS:
            raise KeyError(f"Invalid config key: {key}")
        if isinstance(value, str):
            try:
                value = self.PARSERS[key](value)
            except ValueError as exc:
                raise ValueError(f"{key}: {exc}") from exc
        self._config[key] = value

    def get(self, key):
        if isinstance(key, RunConfigKey):
            key = key.value
        if key not in self.DEFAULTS:
            raise KeyError(f"Invalid config key: {key}")
        return self._config.get(key)

    def reset(self):
        self._config = deepcopy(self.DEFAULTS)

    def as_dict(self):
        return deepcopy(self._config)

    def apply_overrides(self, assignments: Iterable[str]) -> None:
        """Apply `key=value` strings, as given to the repeatable --set flag."""
        for assignment in assignments:
            key, separator, value = assignment.partition("=")
            if not separator:
                raise ValueError(f"--set expects key=value, got {assignment!r}")
            self.set(key.strip(), value)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        config = cls()
        for number, line in enumerate(text.splitlines(), start=1):
            pair = parse_key_value(line, number)
            if pair is None:
                continue
            key, value = pair
            try:
                config.set(key, value)
            except KeyError:
                raise KeyError(f"line {number}: invalid config key: {key}") from None
        return config

    @classmethod
    def load(cls, path: Optional[str] = None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path, "r", encoding="utf-8") as f:
            config = cls.parse(f.read())
        logger.info("Loaded run configuration from %s", path)
        return config

    def dumps(self) -> str:
        lines = []
        for key in self.DEFAULTS:
            lines.append(f"{key} = {_render(self._config[key])}")
        return "\n".join(lines) + "\n"

    def save(self, path: str = "run.conf") -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    # Builders for the domain objects. Range checks happen in their constructors.

    def grid(self) -> SpectralGrid:
        return make_grid(self.get(K.GRID_M), self.get(K.GRID_K_MAX))

    def emitter(self) -> EmitterParams:
        return EmitterParams(self.get(K.EMITTER_GAMMA), self.get(K.EMITTER_DELTA))

    def pulse(self) -> InputPulse:
        sigma_k = self.get(K.INPUT_SIGMA_K)
        if not sigma_k > 0:
            raise ValueError(f"input.sigma_k={sigma_k} must be positive")
        return InputPulse(sigma_k, self.get(K.INPUT_K0))

    def shell(self) -> EnergyShell:
        return EnergyShell(self.get(K.RUN_SHELL))

    def trap(self) -> Optional[TrapParams]:
        if not self.get(K.TRAP_ENABLED):
            return None
        omega_dt = self.get(K.TRAP_OMEGA_DT)
        if omega_dt is not None:
            sigma_t = self.get(K.TRAP_SIGMA_T) or 1.0 / self.pulse().sigma_k
            return trap_from_rotation(omega_dt, sigma_t)
        lambda1 = self.get(K.TRAP_LAMBDA1)
        lambda3 = self.get(K.TRAP_LAMBDA3)
        lambda3 = lambda1 if lambda3 is None else lambda3
        return TrapParams(lambda1, self.get(K.TRAP_LAMBDA2), lambda3)

    def compensation(self) -> CompensationFlags:
        return CompensationFlags(
            delay=self.get(K.RUN_DELAY_COMPENSATION),
            second_order=self.get(K.RUN_SECOND_ORDER_COMPENSATION),
        )

    def cascade_config(self, kernel: ScatterKernel) -> CascadeConfig:
        n_rounds = self.get(K.RUN_N_ROUNDS)
        if n_rounds < 1:
            raise ValueError(f"run.n_rounds={n_rounds} must be at least 1")
        return CascadeConfig(
            n_rounds=n_rounds,
            grid=self.grid(),
            kernel=kernel,
            trap=self.trap(),
            compensation=self.compensation(),
            pulse=self.pulse(),
        )

    def optimization_spec(self, threads: int = 1) -> OptimizationSpec:
        trap = self.trap()
        start: tuple[float, ...] = (self.pulse().sigma_k, self.emitter().delta)
        if trap is not None:
            start += (trap.lambda1, trap.lambda2)
        return OptimizationSpec(
            n_values=tuple(self.get(K.OPTIMIZER_N_VALUES)),
            trap_modes=tuple(self.get(K.OPTIMIZER_TRAP_MODES)),
            objective=Objective(self.get(K.OPTIMIZER_OBJECTIVE)),
            bounds=Bounds(
                sigma_k=self.get(K.OPTIMIZER_SIGMA_K_BOUNDS),
                delta=self.get(K.OPTIMIZER_DELTA_BOUNDS),
                lambda1=self.get(K.OPTIMIZER_LAMBDA1_BOUNDS),
                lambda2=self.get(K.OPTIMIZER_LAMBDA2_BOUNDS),
            ),
            restarts=self.get(K.OPTIMIZER_RESTARTS),
            seed=self.get(K.OPTIMIZER_SEED),
            fatol=self.get(K.OPTIMIZER_FATOL),
            xatol=self.get(K.OPTIMIZER_XATOL),
            max_evals=self.get(K.OPTIMIZER_MAX_EVALS),
            grid=self.grid(),
            compensation=self.compensation(),
            k0=self.pulse().k0,
            sorter_layout=SorterLayout(self.get(K.OPTIMIZER_SORTER_LAYOUT)),
            verify_grid=self.get(K.OPTIMIZER_VERIFY_GRID),
            start=start,
            threads=threads,
        )

    def oracle_options(self) -> OracleOptions:
        return OracleOptions(
            grid_m=self.get(K.ORACLE_M),
            k_max=self.get(K.ORACLE_K_MAX),
            max_step=self.get(K.ORACLE_MAX_STEP),
            epsilon=self.get(K.ORACLE_EPSILON),
            truncation=self.get(K.ORACLE_TRUNCATION),
        )


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, tuple):
        return ", ".join(_render(item) for item in value)
    return str(value)
