"""
Settings and configuration management for frameprobe.
Loads environment variables using python-dotenv.

Explicit command-line flags always take precedence over these values.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv

# Load environment variables from .env file
# .env file is in the project root
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)

MAX_SEED = 2 ** 64 - 1
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _env(var_name: str, default: str) -> str:
    value = os.getenv(var_name, default)
    if not value or value.strip() == '':
        return default
    return value.strip()


def parse_seed(value: str, source: str = "seed") -> int:
    """
    Parse a seed as an unsigned 64-bit integer.

    Raises:
        ValueError: If the value is not an integer in [0, 2^64)
    """
    try:
        seed = int(str(value).strip())
    except ValueError as e:
        raise ValueError(f"{source} must be an integer (e.g., 7), got: '{value}'") from e
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"{source} must be between 0 and 2^64-1, got: {seed}")
    return seed


def get_seed() -> int:
    """Get the default seed from FRAMEPROBE_SEED. Defaults to 0."""
    return parse_seed(_env('FRAMEPROBE_SEED', '0'), 'FRAMEPROBE_SEED')


def get_log_level() -> str:
    """Get the log level name from FRAMEPROBE_LOG_LEVEL. Defaults to INFO."""
    level = _env('FRAMEPROBE_LOG_LEVEL', 'INFO').upper()
    if level not in LOG_LEVELS:
        raise ValueError(
            f"FRAMEPROBE_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got: '{level}'. "
            f"Please check your .env file."
        )
    return level


def get_ood_prefix() -> str:
    """Get the out-of-domain intent label prefix. Defaults to UNSUPPORTED."""
    prefix = _env('FRAMEPROBE_OOD_PREFIX', 'UNSUPPORTED')
    if any(ch.isspace() or ch in '[]:' for ch in prefix):
        raise ValueError(
            f"FRAMEPROBE_OOD_PREFIX must be a bare label prefix (e.g., UNSUPPORTED), got: '{prefix}'"
        )
    return prefix


def get_prob_profile() -> Tuple[float, float, float]:
    """
    Get the synthetic token probability profile as (correct_mean, incorrect_mean, jitter).

    Defaults to 0.9,0.6,0.02. Range checks happen in ProbProfile.
    """
    raw = _env('FRAMEPROBE_PROB_PROFILE', '0.9,0.6,0.02')
    parts = [p.strip() for p in raw.split(',')]
    if len(parts) != 3:
        raise ValueError(
            f"FRAMEPROBE_PROB_PROFILE must have three comma-separated numbers (e.g., 0.9,0.6,0.02), got: '{raw}'"
        )
    try:
        return float(parts[0]), float(parts[1]), float(parts[2])
    except ValueError as e:
        raise ValueError(
            f"FRAMEPROBE_PROB_PROFILE must contain valid numbers (e.g., 0.9,0.6,0.02), got: '{raw}'"
        ) from e


def get_ce_epochs() -> int:
    """Get the confidence classifier epoch count. Defaults to 500."""
    raw = _env('FRAMEPROBE_CE_EPOCHS', '500')
    try:
        epochs = int(raw)
    except ValueError as e:
        raise ValueError(f"FRAMEPROBE_CE_EPOCHS must be an integer (e.g., 500), got: '{raw}'") from e
    if epochs < 1:
        raise ValueError(f"FRAMEPROBE_CE_EPOCHS should be at least 1, got: {epochs}")
    return epochs


def _positive_float(var_name: str, default: str, allow_zero: bool = False) -> float:
    raw = _env(var_name, default)
    try:
        value = float(raw)
    except ValueError as e:
        raise ValueError(f"{var_name} must be a valid number (e.g., {default}), got: '{raw}'") from e
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{var_name} should be {'non-negative' if allow_zero else 'positive'}, got: {value}")
    return value


def get_ce_step_size() -> float:
    """Get the subgradient base step size. Defaults to 0.5."""
    return _positive_float('FRAMEPROBE_CE_STEP_SIZE', '0.5')


def get_ce_l2() -> float:
    """Get the L2 regularization strength. Defaults to 0.001."""
    return _positive_float('FRAMEPROBE_CE_L2', '0.001', allow_zero=True)


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging in the project format."""
    logging.basicConfig(
        level=getattr(logging, level or get_log_level()),
        format='[%(asctime)s] %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
    )
