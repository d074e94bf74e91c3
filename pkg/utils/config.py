"""Runtime settings loaded from the environment (python-dotenv).

Every knob is a ``PADIC_CF_*`` variable; a ``.env`` file at the project root
is picked up automatically. Values not set fall back to the defaults below.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Repo root: utils/ -> project root
PROJECT_ROOT = Path(__file__).resolve().parents[1]
ENV_PREFIX = "PADIC_CF_"


@dataclass(frozen=True)
class Settings:
    max_steps: int = 20_000
    initial_precision: int = 64
    precision_cap: int = 1 << 20
    oracle_width: int = 256
    oracle_guard: int = 8
    oracle_retries: int = 4
    jobs: int = 1
    verify_max_steps: int = 2_000
    log_level: str = "WARNING"


def load_settings(env_file: Optional[Path] = None) -> Settings:
    """Load settings from ``env_file`` (default: project ``.env``) and the environment.

    Raises:
        RuntimeError: If a variable is set but is not a positive integer.
    """

    load_dotenv(dotenv_path=env_file or PROJECT_ROOT / ".env")
    defaults = Settings()
    settings = Settings(
        max_steps=_int_var("MAX_STEPS", defaults.max_steps),
        initial_precision=_int_var("INITIAL_PRECISION", defaults.initial_precision),
        precision_cap=_int_var("PRECISION_CAP", defaults.precision_cap),
        oracle_width=_int_var("ORACLE_WIDTH", defaults.oracle_width),
        oracle_guard=_int_var("ORACLE_GUARD", defaults.oracle_guard),
        oracle_retries=_int_var("ORACLE_RETRIES", defaults.oracle_retries),
        jobs=_int_var("JOBS", defaults.jobs),
        verify_max_steps=_int_var("VERIFY_MAX_STEPS", defaults.verify_max_steps),
        log_level=os.getenv(ENV_PREFIX + "LOG_LEVEL", defaults.log_level).strip().upper()
        or defaults.log_level,
    )
    if settings.oracle_guard < 8:
        raise RuntimeError(f"{ENV_PREFIX}ORACLE_GUARD must be at least 8, got {settings.oracle_guard}.")
    logger.debug("Loaded settings: %s", settings)
    return settings


def _int_var(name: str, default: int) -> int:
    raw = os.getenv(ENV_PREFIX + name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise RuntimeError(f"{ENV_PREFIX}{name} must be an integer, got {raw!r}.") from exc
    if value < 1:
        raise RuntimeError(f"{ENV_PREFIX}{name} must be positive, got {value}.")
    return value
