"""Standalone helpers: argument validators, seeding and content hashing."""

import dataclasses
import hashlib
import json
import logging
import random
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import torch

from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------

def validate_same_shape(a: torch.Tensor, b: torch.Tensor) -> Optional[str]:
    """Return an error message if the two tensors differ in shape, else None."""
    if a.shape != b.shape:
        return f"Shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}"
    return None


def require_same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    err = validate_same_shape(a, b)
    if err:
        raise InvalidArgumentError(err)


def validate_index_pairs(pairs: Sequence[Tuple[int, int]], size: int) -> Optional[str]:
    """Return an error message if any pair is out of range or degenerate, else None."""
    for i, j in pairs:
        if not (0 <= i < size and 0 <= j < size):
            return f"Pair ({i}, {j}) is out of range for a batch of {size}"
        if i == j:
            return f"Pair ({i}, {j}) compares an image with itself"
    return None


def require_positive(value: int, name: str) -> int:
    if value < 1:
        raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
    return value


def require_finite(tensor: torch.Tensor, name: str) -> torch.Tensor:
    if not torch.isfinite(tensor).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return tensor


def pairs_to_index(pairs: Sequence[Tuple[int, int]], device: Optional[torch.device] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """Split a pair list into two index tensors."""
    if not pairs:
        empty = torch.zeros(0, dtype=torch.long, device=device)
        return empty, empty.clone()
    idx = torch.tensor(pairs, dtype=torch.long, device=device)
    return idx[:, 0], idx[:, 1]


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

def derive_seed(base: int, *parts: int) -> int:
    """Deterministic child seed for (base, parts...), e.g. one per training step."""
    state = np.random.SeedSequence([int(base) & 0xFFFFFFFF, *[int(p) & 0xFFFFFFFF for p in parts]])
    return int(state.generate_state(1, dtype=np.uint32)[0])


def make_generator(seed: int, device: Optional[torch.device] = None) -> torch.Generator:
    gen = torch.Generator(device=device or "cpu")
    gen.manual_seed(int(seed))
    return gen


def seed_everything(seed: int, deterministic: bool = True) -> None:
    """Seed python, numpy and torch; optionally force deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
        if torch.backends.cudnn.is_available():
            torch.backends.cudnn.benchmark = False
            torch.backends.cudnn.deterministic = True


# ---------------------------------------------------------------------------
# Serialization and hashing
# ---------------------------------------------------------------------------

def to_jsonable(obj: Any) -> Any:
    """Convert dataclasses, enums, paths and tensors into JSON-safe values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, torch.Tensor):
        return obj.detach().cpu().tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def content_hash(obj: Any) -> str:
    """sha256 of the canonical JSON form of ``obj``."""
    payload = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def state_dict_hash(state: Dict[str, torch.Tensor]) -> str:
    """sha256 over parameter names and raw tensor bytes, in sorted key order."""
    digest = hashlib.sha256()
    for key in sorted(state):
        digest.update(key.encode())
        digest.update(state[key].detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def chunked(items: Sequence[Any], size: int) -> Iterable[Sequence[Any]]:
    for start in range(0, len(items), size):
        yield items[start:start + size]
