"""Environment settings and logging bootstrap."""

import logging
import os
from pathlib import Path

import torch
from dotenv import load_dotenv

# Load environment variables from .env file
project_root = Path(__file__).parent.parent
env_path = project_root / ".env"
load_dotenv(dotenv_path=env_path)

# Configure logging
logging.basicConfig(
    level=os.getenv("SCGAN_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Version
VERSION = "1.0.0"

_DEFAULT_DATA_ROOT = Path.home() / ".cache" / "scgan-toolkit"


def get_data_root() -> Path:
    """Dataset cache root (SCGAN_DATA_ROOT)."""
    root = os.getenv("SCGAN_DATA_ROOT", "").strip()
    return Path(root).expanduser() if root else _DEFAULT_DATA_ROOT


def get_fetch_timeout() -> float:
    try:
        return float(os.getenv("SCGAN_FETCH_TIMEOUT", "60"))
    except ValueError:
        return 60.0


def deterministic_enabled() -> bool:
    return os.getenv("SCGAN_DETERMINISTIC", "true").lower() == "true"


def get_device(requested: str = "") -> torch.device:
    """Resolve the compute device.

    An explicit request wins over SCGAN_DEVICE; ``auto`` picks CUDA when present.
    """
    choice = (requested or os.getenv("SCGAN_DEVICE", "auto")).lower()
    if choice == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    if choice.startswith("cuda") and not torch.cuda.is_available():
        logger.warning("Device '%s' requested but CUDA is unavailable; falling back to cpu", choice)
        return torch.device("cpu")
    return torch.device(choice)
