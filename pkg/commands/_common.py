"""Flags shared by every command and the context built from them."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from typing import Optional

from services.emitter_scattering import ScatterKernel
from services.kernel_store import resolve_kernel
from services.optimizer import Objective
from services.results import ResultWriter
from services.run_config import RunConfig, RunConfigKey
from utils.config import Settings

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("csv", "text")

# Named convenience flags and the config keys they override.
FLAG_KEYS = {
    "n": RunConfigKey.RUN_N_ROUNDS,
    "delta": RunConfigKey.EMITTER_DELTA,
    "sigma_k": RunConfigKey.INPUT_SIGMA_K,
    "lambda1": RunConfigKey.TRAP_LAMBDA1,
    "lambda2": RunConfigKey.TRAP_LAMBDA2,
    "trap": RunConfigKey.TRAP_ENABLED,
    "seed": RunConfigKey.OPTIMIZER_SEED,
    "objective": RunConfigKey.OPTIMIZER_OBJECTIVE,
}


def common_parser() -> argparse.ArgumentParser:
    """Parent parser carrying the configuration and output flags."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one configuration key (repeatable)",
    )
    parser.add_argument("--n", type=int, help="number of scattering rounds")
    parser.add_argument("--delta", type=float, help="emitter detuning in units of gamma")
    parser.add_argument("--sigma-k", dest="sigma_k", type=float, help="input spectral width")
    parser.add_argument("--lambda1", type=float, help="spectral trap coefficient")
    parser.add_argument("--lambda2", type=float, help="temporal trap coefficient")
    parser.add_argument(
        "--trap", action=argparse.BooleanOptionalAction, default=None, help="harmonic trap on/off"
    )
    parser.add_argument("--seed", type=int, help="optimizer seed")
    parser.add_argument("--objective", choices=[objective.value for objective in Objective])
    parser.add_argument("--output", choices=OUTPUT_FORMATS, default="csv")
    parser.add_argument("--out", help="write the result to this path instead of stdout")
    return parser


def load_run_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """File values, then --set overrides, then the named flags."""
    path = args.config or settings.config_path
    config = RunConfig.load(path)
    config.apply_overrides(args.overrides)
    for attribute, key in FLAG_KEYS.items():
        value = getattr(args, attribute, None)
        if value is not None:
            config.set(key, value)
    return config


@dataclass
class CommandContext:
    settings: Settings
    config: RunConfig
    output: str = "csv"
    out: Optional[str] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace, settings: Settings) -> CommandContext:
        return cls(settings, load_run_config(args, settings), args.output, args.out)

    @property
    def text_output(self) -> bool:
        return self.output == "text"

    def kernel(self) -> ScatterKernel:
        """Kernel for nonlinear runs; CalibrationError when none is stored."""
        config = self.config
        return resolve_kernel(
            config.emitter(),
            config.shell(),
            config.get(RunConfigKey.RUN_KERNEL_FILE),
            config.get(RunConfigKey.RUN_UNCALIBRATED),
        )

    def emit(self, content: str) -> None:
        if self.out:
            ResultWriter().write(content, self.out)
            return
        sys.stdout.write(content)
        sys.stdout.flush()
