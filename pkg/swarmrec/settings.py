"""
Environment and config-file settings for swarmrec
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "SWARMREC_"

# environment variable -> RunConfig key
ENV_KEYS = {
    "SWARMREC_SEED": "seed",
    "SWARMREC_WORKERS": "workers",
    "SWARMREC_OUT": "out_dir",
    "SWARMREC_DATA_DIR": "data_dir",
    "SWARMREC_RESULTS_DB": "results_db",
}

DEFAULT_LOG_LEVEL = "INFO"


def load_environment(dotenv_path: Optional[Union[str, Path]] = None) -> Dict[str, str]:
    """
    Read ``SWARMREC_*`` settings from the environment

    A ``.env`` file is loaded first without overriding variables that are
    already set.

    Args:
        dotenv_path: Explicit .env file; default searches from the working directory

    Returns:
        RunConfig keys mapped to their raw string values
    """
    load_dotenv(dotenv_path=dotenv_path, override=False)
    values = {}
    for variable, key in ENV_KEYS.items():
        raw = os.environ.get(variable)
        if raw is not None and raw.strip():
            values[key] = raw.strip()
    return values


def log_level_from_env() -> str:
    return os.environ.get(f"{ENV_PREFIX}LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Parse a flat ``key = value`` config file

    Blank lines and lines starting with ``#`` are ignored. Keys are
    normalized to snake_case (``walk-len`` and ``walk_len`` are the same key).

    Raises:
        ConfigurationError: Missing file or a line without ``=``
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values: Dict[str, str] = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigurationError(f"{path}:{line_number}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = normalize_key(key)
            if not key:
                raise ConfigurationError(f"{path}:{line_number}: empty key")
            values[key] = value.strip()
    logger.debug(f"Read {len(values)} settings from {path}")
    return values


def normalize_key(key: str) -> str:
    return key.strip().replace("-", "_").lower()


def merge_sources(*sources: Dict[str, Any]) -> Dict[str, Any]:
    """Merge setting dicts; later sources win, None values are skipped"""
    merged: Dict[str, Any] = {}
    for source in sources:
        for key, value in source.items():
            if value is not None:
                merged[key] = value
    return merged
