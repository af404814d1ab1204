"""
Settings - Secrets-backed Configuration
Reads protocol overrides from Streamlit secrets and sets up logging
"""

import logging
from typing import Any

import streamlit as st

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def secret(key: str, default: Any = None) -> Any:
    """
    Look up a key in st.secrets.

    Falls back to the default when the key is missing or when no
    secrets.toml exists (library use outside `streamlit run`).
    """
    try:
        return st.secrets.get(key, default)
    except Exception:
        # No secrets file: st.secrets raises on first access
        return default


def secret_float(key: str, default: float) -> float:
    return float(secret(key, default))


def secret_int(key: str, default: int) -> int:
    return int(secret(key, default))


def configure_logging(verbose: bool = False):
    """Apply the repository-wide log format; LOG_LEVEL secret wins over the default."""
    level_name = "DEBUG" if verbose else str(secret("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT
    )
    # numba logs its JIT passes at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)
