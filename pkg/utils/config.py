"""Process settings for the photon-gate simulator.

Loads environment variables (optionally from the file named by ENV_FILE) and
exposes them as a typed, immutable Settings object. Run parameters live in
the key/value run configuration instead (services/run_config.py).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

env_file = os.getenv("ENV_FILE", ".env")
load_dotenv(dotenv_path=env_file)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    """Strongly-typed settings loaded from environment variables."""

    threads: int
    log_dir: str = "logs"
    log_level: str = "INFO"
    config_path: Optional[str] = None

    @property
    def log_level_value(self) -> int:
        return getattr(logging, self.log_level)


def _cpu_count() -> int:
    return os.cpu_count() or 1


def get_settings() -> Settings:
    """Return the settings loaded from process environment variables.

    Raises:
        ValueError: If PHOTON_GATE_LOG_LEVEL is not a logging level name.
    """

    threads_raw = os.getenv("PHOTON_GATE_THREADS", "")
    threads = int(threads_raw) if threads_raw.strip().isdigit() else _cpu_count()
    threads = max(1, threads)

    log_level = os.getenv("PHOTON_GATE_LOG_LEVEL", "INFO").upper()
    if log_level not in LOG_LEVELS:
        raise ValueError(
            f"PHOTON_GATE_LOG_LEVEL={log_level!r} is not one of {', '.join(LOG_LEVELS)}."
        )

    return Settings(
        threads=threads,
        log_dir=os.getenv("PHOTON_GATE_LOG_DIR", "logs"),
        log_level=log_level,
        config_path=os.getenv("PHOTON_GATE_CONFIG") or None,
    )
